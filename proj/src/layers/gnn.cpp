#include "gefm/layers/gnn.hpp"

#include <stdexcept>

#include "gefm/numcore/ops.hpp"

namespace gefm::layers {

using num::Tensor;

const char* kind_name(LayerKind kind) {
  return kind == LayerKind::interaction ? "interaction" : "propagation";
}

EdgeIndex make_edge_index(const mesh::EdgeList& edges, std::size_t num_senders, std::size_t num_receivers) {
  EdgeIndex index;
  index.num_senders = num_senders;
  index.num_receivers = num_receivers;
  index.in_degree.assign(num_receivers, 0);
  index.senders.reserve(edges.size());
  index.receivers.reserve(edges.size());
  for (const auto& [s, r] : edges) {
    if (s >= num_senders || r >= num_receivers) {
      throw std::out_of_range("make_edge_index: edge (" + std::to_string(s) + ", " + std::to_string(r) +
                              ") outside node sets of size " + std::to_string(num_senders) + " and " +
                              std::to_string(num_receivers));
    }
    index.senders.push_back(s);
    index.receivers.push_back(r);
    ++index.in_degree[r];
  }
  return index;
}

namespace {

void check_shapes(const EdgeIndex& index, const Tensor& senders, const Tensor& edges, const Tensor& receivers) {
  const auto d = receivers.cols();
  if (senders.rank() != 2 || edges.rank() != 2 || receivers.rank() != 2) {
    throw num::ShapeError("gnn layer: representations must be matrices");
  }
  if (senders.rows() != index.num_senders || receivers.rows() != index.num_receivers ||
      edges.rows() != index.size()) {
    throw num::ShapeError("gnn layer: representation rows do not match the edge set (senders " +
                          std::to_string(senders.rows()) + "/" + std::to_string(index.num_senders) +
                          ", edges " + std::to_string(edges.rows()) + "/" + std::to_string(index.size()) +
                          ", receivers " + std::to_string(receivers.rows()) + "/" +
                          std::to_string(index.num_receivers) + ")");
  }
  if (senders.cols() != d || edges.cols() != d) throw num::ShapeError("gnn layer: representation widths differ");
}

Tensor edge_update(const EdgeIndex& index, const Tensor& senders, const Tensor& edges, const Tensor& receivers,
                   const GnnLayerParams& params, Tensor* gathered_senders) {
  auto hs = num::gather_rows(senders, index.senders);
  auto hr = num::gather_rows(receivers, index.receivers);
  if (gathered_senders) *gathered_senders = hs;
  return num::mlp_forward(params.edge_mlp, num::concat({edges, hs, hr}));
}

}  // namespace

LayerOutput interaction_step(const EdgeIndex& index, const Tensor& senders, const Tensor& edges,
                             const Tensor& receivers, const GnnLayerParams& params) {
  check_shapes(index, senders, edges, receivers);
  auto messages = edge_update(index, senders, edges, receivers, params, nullptr);
  auto aggregate = num::scatter_add_rows(messages, index.receivers, index.num_receivers);
  auto node_delta = num::mlp_forward(params.node_mlp, num::concat({receivers, aggregate}));
  return {num::add(receivers, node_delta), num::add(edges, messages)};
}

LayerOutput propagation_step(const EdgeIndex& index, const Tensor& senders, const Tensor& edges,
                             const Tensor& receivers, const GnnLayerParams& params) {
  check_shapes(index, senders, edges, receivers);
  std::vector<double> inv_degree(index.num_receivers);
  for (std::size_t r = 0; r < index.num_receivers; ++r) {
    if (index.in_degree[r] == 0) {
      throw std::invalid_argument("propagation_step: receiver " + std::to_string(r) + " has no in-edges");
    }
    inv_degree[r] = 1.0 / static_cast<double>(index.in_degree[r]);
  }
  Tensor hs;
  auto delta = edge_update(index, senders, edges, receivers, params, &hs);
  auto messages = num::add(hs, delta);
  auto mean = num::scale_rows(num::scatter_add_rows(messages, index.receivers, index.num_receivers), inv_degree);
  auto node_delta = num::mlp_forward(params.node_mlp, num::concat({receivers, mean}));
  return {num::add(mean, node_delta), num::add(edges, messages)};
}

LayerOutput gnn_step(const EdgeIndex& index, const Tensor& senders, const Tensor& edges, const Tensor& receivers,
                     const GnnLayerParams& params) {
  return params.kind == LayerKind::interaction ? interaction_step(index, senders, edges, receivers, params)
                                               : propagation_step(index, senders, edges, receivers, params);
}

Tensor embed(const Tensor& features, const num::MlpParams& params) { return num::mlp_forward(params, features); }

void init_gnn_layer(num::ParamStore& store, const std::string& prefix, std::size_t d_z, const num::MlpInit& init,
                    num::RngStream& rng) {
  num::init_mlp(store, prefix + ".edge", {3 * d_z, d_z, d_z, true}, init, rng);
  num::init_mlp(store, prefix + ".node", {2 * d_z, d_z, d_z, true}, init, rng);
}

GnnLayerParams gnn_view(const num::ParamStore& store, const std::string& prefix, LayerKind kind) {
  return {num::mlp_view(store, prefix + ".edge"), num::mlp_view(store, prefix + ".node"), kind};
}

}  // namespace gefm::layers
