#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gefm/meshgraph/geometry.hpp"
#include "gefm/numcore/mlp.hpp"
#include "gefm/numcore/params.hpp"
#include "gefm/numcore/rng.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::layers {

enum class LayerKind { interaction, propagation };

const char* kind_name(LayerKind kind);

/// Edge endpoints of one edge set, in the layout the message-passing ops use.
struct EdgeIndex {
  std::vector<std::size_t> senders;
  std::vector<std::size_t> receivers;
  std::size_t num_senders = 0;
  std::size_t num_receivers = 0;
  std::vector<std::size_t> in_degree;  // per receiver

  std::size_t size() const { return senders.size(); }
};

EdgeIndex make_edge_index(const mesh::EdgeList& edges, std::size_t num_senders, std::size_t num_receivers);

struct GnnLayerParams {
  num::MlpParams edge_mlp;  // input (edge, sender, receiver), width 3 d_z
  num::MlpParams node_mlp;  // input (receiver, aggregate), width 2 d_z
  LayerKind kind = LayerKind::interaction;
};

struct LayerOutput {
  num::Tensor receivers;  // H_R'
  num::Tensor edges;      // E'
};

/// e' = MLP(e, h_s, h_r); E' = E + e'; H_R' = H_R + MLP(H_R, sum of incoming e').
/// Receivers without in-edges aggregate a zero vector.
LayerOutput interaction_step(const EdgeIndex& index, const num::Tensor& senders, const num::Tensor& edges,
                             const num::Tensor& receivers, const GnnLayerParams& params);

/// e' = h_s + MLP(e, h_s, h_r); E' = E + e'; m = mean of incoming e';
/// H_R' = m + MLP(H_R, m). Every receiver needs at least one in-edge.
LayerOutput propagation_step(const EdgeIndex& index, const num::Tensor& senders, const num::Tensor& edges,
                             const num::Tensor& receivers, const GnnLayerParams& params);

/// Dispatches on params.kind.
LayerOutput gnn_step(const EdgeIndex& index, const num::Tensor& senders, const num::Tensor& edges,
                     const num::Tensor& receivers, const GnnLayerParams& params);

/// MLP mapping raw features to d_z-wide representations.
num::Tensor embed(const num::Tensor& features, const num::MlpParams& params);

/// Registers `<prefix>.edge.*` and `<prefix>.node.*` (both LayerNorm-ed).
void init_gnn_layer(num::ParamStore& store, const std::string& prefix, std::size_t d_z,
                    const num::MlpInit& init, num::RngStream& rng);

GnnLayerParams gnn_view(const num::ParamStore& store, const std::string& prefix, LayerKind kind);

}  // namespace gefm::layers
