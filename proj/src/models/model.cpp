#include "gefm/models/model.hpp"

#include <algorithm>
#include <json.hpp>
#include <stdexcept>

#include "gefm/numcore/mlp.hpp"
#include "gefm/numcore/ops.hpp"
#include "gefm/numcore/rng.hpp"

namespace gefm::models {

using layers::LayerKind;
using num::ParamStore;
using num::Tensor;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::graphcast: return "graphcast";
    case Variant::graphfm: return "graphfm";
    case Variant::graph_efm: return "graph_efm";
    case Variant::graph_efm_ms: return "graph_efm_ms";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (auto v : {Variant::graphcast, Variant::graphfm, Variant::graph_efm, Variant::graph_efm_ms}) {
    if (name == variant_name(v)) return v;
  }
  throw std::invalid_argument("unknown model variant '" + name +
                              "' (expected graphcast, graphfm, graph_efm or graph_efm_ms)");
}

bool is_probabilistic(Variant v) { return v == Variant::graph_efm || v == Variant::graph_efm_ms; }

mesh::Kind required_graph_kind(Variant v) {
  return (v == Variant::graphcast || v == Variant::graph_efm_ms) ? mesh::Kind::multiscale : mesh::Kind::hierarchical;
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::json j = {{"variant", variant_name(c.variant)},
                      {"state_dim", c.state_dim},
                      {"forcing_dim", c.forcing_dim},
                      {"d_z", c.d_z},
                      {"processor_steps", c.processor_steps},
                      {"predictor_sweeps", c.predictor_sweeps},
                      {"ms_latent_steps", c.ms_latent_steps},
                      {"ms_predictor_steps", c.ms_predictor_steps},
                      {"ms_variational_steps", c.ms_variational_steps},
                      {"output_sigma", c.output_sigma},
                      {"static_prior", c.static_prior}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  read("state_dim", c.state_dim);
  read("forcing_dim", c.forcing_dim);
  read("d_z", c.d_z);
  read("processor_steps", c.processor_steps);
  read("predictor_sweeps", c.predictor_sweeps);
  read("ms_latent_steps", c.ms_latent_steps);
  read("ms_predictor_steps", c.ms_predictor_steps);
  read("ms_variational_steps", c.ms_variational_steps);
  read("output_sigma", c.output_sigma);
  read("static_prior", c.static_prior);
  return c;
}

std::shared_ptr<const GraphContext> make_graph_context(const mesh::MeshGraph& graph) {
  auto ctx = std::make_shared<GraphContext>();
  ctx->kind = graph.kind;
  ctx->num_levels = graph.num_levels;
  ctx->level_sizes = graph.level_sizes;
  ctx->node_width = graph.features.node_width;
  ctx->edge_width = graph.features.edge_width;
  ctx->graph_hash = mesh::graph_hash(graph);
  for (std::size_t l = 0; l < graph.level_sizes.size(); ++l) {
    ctx->node_features.push_back(
        Tensor::from({graph.level_sizes[l], ctx->node_width}, graph.features.node.at(l)));
  }
  for (std::size_t i = 0; i < graph.edge_sets.size(); ++i) {
    const auto& set = graph.edge_sets[i];
    ctx->edges.emplace(set.name, layers::make_edge_index(set.edges, graph.level_size(set.sender_level),
                                                         graph.level_size(set.receiver_level)));
    ctx->edge_features.emplace(set.name,
                               Tensor::from({set.edges.size(), ctx->edge_width}, graph.features.edge.at(i)));
  }
  return ctx;
}

namespace {

std::string lvl(std::size_t l) { return std::to_string(l); }

std::size_t head_width(const ModelConfig& c) { return c.output_sigma ? 2 * c.state_dim : c.state_dim; }

std::size_t graphfm_sweeps(const ModelConfig& c) { return c.processor_steps / 2; }

// Everything a forward pass may touch, grouped by the role of each block.
struct Blueprint {
  std::vector<std::pair<std::string, num::MlpShape>> embedders;
  std::vector<std::string> gnn_layers;
  std::vector<std::pair<std::string, num::MlpShape>> residual_mlps;
  std::vector<std::pair<std::string, num::MlpShape>> heads;
};

Blueprint blueprint(const ModelConfig& c, const GraphContext& g) {
  Blueprint b;
  const auto d = c.d_z;
  const std::size_t L = g.num_levels;
  for (std::size_t l = 1; l <= L; ++l) b.embedders.push_back({"static.node.l" + lvl(l), {g.node_width, d, d, true}});
  for (const auto& [name, idx] : g.edges) b.embedders.push_back({"static.edge." + name, {g.edge_width, d, d, true}});
  const std::size_t grid_in = 2 * c.state_dim + c.forcing_dim + g.node_width;
  b.embedders.push_back({"embed.grid", {grid_in, d, d, true}});

  auto& gnn = b.gnn_layers;
  switch (c.variant) {
    case Variant::graphcast:
      gnn.push_back("det.g2m");
      for (std::size_t k = 0; k < c.processor_steps; ++k) gnn.push_back("det.m2m." + lvl(k));
      gnn.push_back("det.m2g");
      break;
    case Variant::graphfm:
      gnn.push_back("det.g2m");
      for (std::size_t l = 2; l <= L; ++l) gnn.push_back("det.init_up." + lvl(l));
      for (std::size_t s = 0; s < graphfm_sweeps(c); ++s) {
        const auto p = "det.s" + lvl(s);
        gnn.push_back(p + ".top");
        for (std::size_t l = L - 1; l >= 1; --l) {
          gnn.push_back(p + ".down." + lvl(l));
          gnn.push_back(p + ".down_intra." + lvl(l));
        }
        gnn.push_back(p + ".bottom");
        for (std::size_t l = 2; l <= L; ++l) {
          gnn.push_back(p + ".up." + lvl(l));
          gnn.push_back(p + ".up_intra." + lvl(l));
        }
      }
      for (std::size_t l = L - 1; l >= 1; --l) gnn.push_back("det.final_down." + lvl(l));
      gnn.push_back("det.m2g");
      break;
    case Variant::graph_efm:
      for (const std::string comp : {"prior", "var"}) {
        gnn.push_back(comp + ".g2m");
        gnn.push_back(comp + ".intra.1");
        for (std::size_t l = 2; l <= L; ++l) {
          gnn.push_back(comp + ".up." + lvl(l));
          gnn.push_back(comp + ".intra." + lvl(l));
        }
      }
      gnn.push_back("pred.g2m");
      for (std::size_t s = 0; s < c.predictor_sweeps; ++s) {
        const auto p = "pred.s" + lvl(s);
        for (std::size_t l = 1; l < L; ++l) {
          gnn.push_back(p + ".up_intra." + lvl(l));
          gnn.push_back(p + ".up." + lvl(l + 1));
        }
        gnn.push_back(p + ".top");
        for (std::size_t l = L - 1; l >= 1; --l) {
          gnn.push_back(p + ".down." + lvl(l));
          gnn.push_back(p + ".down_intra." + lvl(l));
        }
      }
      gnn.push_back("pred.m2g");
      break;
    case Variant::graph_efm_ms:
      gnn.push_back("prior.g2m");
      for (std::size_t k = 0; k < c.ms_latent_steps; ++k) gnn.push_back("prior.m2m." + lvl(k));
      gnn.push_back("var.g2m");
      for (std::size_t k = 0; k < c.ms_variational_steps; ++k) gnn.push_back("var.m2m." + lvl(k));
      gnn.push_back("pred.g2m");
      for (std::size_t k = 0; k < c.ms_predictor_steps; ++k) gnn.push_back("pred.m2m." + lvl(k));
      gnn.push_back("pred.m2g");
      break;
  }

  const std::string out = is_probabilistic(c.variant) ? "pred" : "det";
  b.residual_mlps.push_back({out + ".grid_mlp", {d, d, d, true}});
  b.heads.push_back({out + ".head", {d, d, head_width(c), false}});
  if (is_probabilistic(c.variant)) {
    b.embedders.push_back({"var.embed.grid", {grid_in + c.state_dim, d, d, true}});
    b.heads.push_back({"prior.head", {d, d, d, false}});
    b.heads.push_back({"var.head", {d, d, 2 * d, false}});
  }
  return b;
}

void validate_config(const ModelConfig& c, const GraphContext& g) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (c.state_dim == 0) fail("state_dim must be positive");
  if (c.d_z == 0) fail("d_z must be positive");
  if (g.kind != required_graph_kind(c.variant)) {
    fail(std::string("variant ") + variant_name(c.variant) + " needs a " +
         (required_graph_kind(c.variant) == mesh::Kind::multiscale ? "multiscale" : "hierarchical") + " graph");
  }
  if (g.num_levels == 0) fail("graph has no mesh levels");
  if (c.variant == Variant::graphfm && (c.processor_steps == 0 || c.processor_steps % 2 != 0)) {
    fail("Graph-FM needs a positive, even processing-step count (got " + std::to_string(c.processor_steps) + ")");
  }
  if (c.variant == Variant::graph_efm && g.num_levels < 2) fail("Graph-EFM needs at least two mesh levels");
  if (c.variant == Variant::graph_efm && c.predictor_sweeps == 0) fail("predictor_sweeps must be positive");
  // The latent encoders run propagation layers over each level's own edges.
  if (is_probabilistic(c.variant)) {
    const std::size_t top = c.variant == Variant::graph_efm ? g.num_levels : 1;
    for (std::size_t l = 1; l <= top; ++l) {
      const auto& index = g.edges.at(mesh::m2m_name(static_cast<int>(l)));
      if (std::find(index.in_degree.begin(), index.in_degree.end(), 0u) != index.in_degree.end()) {
        fail(std::string(variant_name(c.variant)) + " needs every node of mesh level " + std::to_string(l) +
             " to have an in-edge within the level");
      }
    }
  }
}

}  // namespace

Model::Model(ModelConfig config, std::shared_ptr<const GraphContext> graph)
    : config_(config), graph_(std::move(graph)) {
  if (!graph_) throw std::invalid_argument("Model: missing graph");
  validate_config(config_, *graph_);
}

std::size_t Model::latent_rows() const {
  return config_.variant == Variant::graph_efm_ms ? graph_->level_sizes.at(1)
                                                  : graph_->level_sizes.at(graph_->num_levels);
}

ParamStore Model::init_params(InitMode mode, std::uint64_t seed) const {
  ParamStore store;
  num::RngStream rng({seed, num::Purpose::init, 0, 0});
  const auto b = blueprint(config_, *graph_);
  num::MlpInit embed_init, block_init, head_init;
  switch (mode) {
    case InitMode::standard:
      block_init.norm_gain = 0.0;
      head_init.zero_output = true;
      break;
    case InitMode::zeros:
      embed_init.all_zero = block_init.all_zero = head_init.all_zero = true;
      break;
    case InitMode::random:
      embed_init.bias_scale = block_init.bias_scale = head_init.bias_scale = 0.1;
      break;
  }
  for (const auto& [name, shape] : b.embedders) num::init_mlp(store, name, shape, embed_init, rng);
  for (const auto& name : b.gnn_layers) layers::init_gnn_layer(store, name, config_.d_z, block_init, rng);
  for (const auto& [name, shape] : b.residual_mlps) num::init_mlp(store, name, shape, block_init, rng);
  for (const auto& [name, shape] : b.heads) num::init_mlp(store, name, shape, head_init, rng);
  return store;
}

namespace {

// Working representations during one forward pass.
struct Reps {
  std::vector<Tensor> node;            // index: level (0 = grid)
  std::map<std::string, Tensor> edge;  // index: edge-set name
};

class Pass {
 public:
  Pass(const Model& model, const ParamStore& params) : m_(model), p_(params), g_(model.graph()) {}

  Reps static_reps() const {
    Reps r;
    r.node.resize(g_.num_levels + 1);
    for (std::size_t l = 1; l <= g_.num_levels; ++l) {
      r.node[l] = layers::embed(g_.node_features[l], num::mlp_view(p_, "static.node.l" + lvl(l)));
    }
    for (const auto& [name, feats] : g_.edge_features) {
      r.edge[name] = layers::embed(feats, num::mlp_view(p_, "static.edge." + name));
    }
    return r;
  }

  Tensor embed_grid(const std::string& name, std::initializer_list<Tensor> inputs) const {
    std::vector<Tensor> parts(inputs);
    parts.push_back(g_.node_features[0]);
    for (const auto& t : parts) {
      if (t.rank() != 2 || t.rows() != g_.grid_size()) {
        throw num::ShapeError("model input has shape " + num::shape_str(t.shape()) + ", expected " +
                              std::to_string(g_.grid_size()) + " grid rows");
      }
    }
    auto x = num::concat(std::span<const Tensor>(parts));
    const auto view = num::mlp_view(p_, name);
    if (x.cols() != view.in_width()) {
      throw num::ShapeError("model input width " + std::to_string(x.cols()) + " does not match the configured " +
                            std::to_string(view.in_width()));
    }
    return layers::embed(x, view);
  }

  layers::LayerOutput layer(const std::string& name, LayerKind kind, const std::string& set, const Tensor& senders,
                            const Tensor& edges, const Tensor& receivers) const {
    return layers::gnn_step(g_.edges.at(set), senders, edges, receivers, layers::gnn_view(p_, name, kind));
  }

  // Runs a layer and writes the receiver and edge results back into `r`.
  void update(Reps& r, const std::string& name, LayerKind kind, const std::string& set, std::size_t from,
              std::size_t to) const {
    auto out = layer(name, kind, set, r.node[from], r.edge.at(set), r.node[to]);
    r.node[to] = out.receivers;
    r.edge[set] = out.edges;
  }

  Tensor mlp(const std::string& name, const Tensor& x) const { return num::mlp_forward(num::mlp_view(p_, name), x); }

  Prediction finish(const std::string& prefix, Tensor h_grid, const Tensor& h_mesh1, const Reps& r, LayerKind m2g,
                    const Tensor& x_prev1) const {
    h_grid = num::add(h_grid, mlp(prefix + ".grid_mlp", h_grid));
    h_grid = layer(prefix + ".m2g", m2g, mesh::kM2G, h_mesh1, r.edge.at(mesh::kM2G), h_grid).receivers;
    auto out = mlp(prefix + ".head", h_grid);
    const auto dx = m_.config().state_dim;
    Prediction pred;
    pred.mean = num::add(x_prev1, num::slice_cols(out, 0, dx));
    if (m_.config().output_sigma) pred.sigma = num::softplus(num::slice_cols(out, dx, dx));
    return pred;
  }

  const Model& m_;
  const ParamStore& p_;
  const GraphContext& g_;
};

void require_variant(const Model& m, std::initializer_list<Variant> allowed, const char* op) {
  for (auto v : allowed)
    if (m.config().variant == v) return;
  throw std::invalid_argument(std::string(op) + ": not available for variant " + variant_name(m.config().variant));
}

// Upward pass shared by the latent map and the variational approximation on a
// hierarchy; edge representations stay at their static embeddings.
Tensor hierarchical_encoder(const Pass& pass, const std::string& comp, const Tensor& h_grid) {
  const auto L = pass.g_.num_levels;
  auto r = pass.static_reps();
  auto step = [&](const std::string& name, const std::string& set, std::size_t from, std::size_t to) {
    r.node[to] = pass.layer(name, LayerKind::propagation, set, r.node[from], r.edge.at(set), r.node[to]).receivers;
  };
  r.node[0] = h_grid;
  step(comp + ".g2m", mesh::kG2M, 0, 1);
  step(comp + ".intra.1", mesh::m2m_name(1), 1, 1);
  for (std::size_t l = 2; l <= L; ++l) {
    step(comp + ".up." + lvl(l), mesh::up_name(static_cast<int>(l - 1)), l - 1, l);
    step(comp + ".intra." + lvl(l), mesh::m2m_name(static_cast<int>(l)), l, l);
  }
  return pass.mlp(comp + ".head", r.node[L]);
}

Tensor multiscale_encoder(const Pass& pass, const std::string& comp, std::size_t steps, const Tensor& h_grid) {
  auto r = pass.static_reps();
  const auto m2m = mesh::m2m_name(1);
  auto h = pass.layer(comp + ".g2m", LayerKind::propagation, mesh::kG2M, h_grid, r.edge.at(mesh::kG2M), r.node[1])
               .receivers;
  for (std::size_t k = 0; k < steps; ++k) {
    h = pass.layer(comp + ".m2m." + lvl(k), LayerKind::propagation, m2m, h, r.edge.at(m2m), h).receivers;
  }
  return pass.mlp(comp + ".head", h);
}

}  // namespace

Prediction step_multiscale(const Model& model, const ParamStore& params, const StepInput& in) {
  require_variant(model, {Variant::graphcast}, "step_multiscale");
  const Pass pass(model, params);
  auto r = pass.static_reps();
  r.node[0] = pass.embed_grid("embed.grid", {in.x_prev2, in.x_prev1, in.forcing});
  const auto I = LayerKind::interaction;
  pass.update(r, "det.g2m", I, mesh::kG2M, 0, 1);
  for (std::size_t k = 0; k < model.config().processor_steps; ++k) {
    pass.update(r, "det.m2m." + lvl(k), I, mesh::m2m_name(1), 1, 1);
  }
  return pass.finish("det", r.node[0], r.node[1], r, I, in.x_prev1);
}

Prediction step_graphfm(const Model& model, const ParamStore& params, const StepInput& in) {
  require_variant(model, {Variant::graphfm}, "step_graphfm");
  const Pass pass(model, params);
  const auto L = model.graph().num_levels;
  const auto I = LayerKind::interaction, P = LayerKind::propagation;
  auto r = pass.static_reps();
  r.node[0] = pass.embed_grid("embed.grid", {in.x_prev2, in.x_prev1, in.forcing});
  auto intra = [&](const std::string& name, std::size_t l) {
    pass.update(r, name, I, mesh::m2m_name(static_cast<int>(l)), l, l);
  };
  auto up = [&](const std::string& name, LayerKind kind, std::size_t to) {
    pass.update(r, name, kind, mesh::up_name(static_cast<int>(to - 1)), to - 1, to);
  };
  auto down = [&](const std::string& name, std::size_t to) {
    pass.update(r, name, I, mesh::down_name(static_cast<int>(to + 1)), to + 1, to);
  };

  pass.update(r, "det.g2m", P, mesh::kG2M, 0, 1);
  for (std::size_t l = 2; l <= L; ++l) up("det.init_up." + lvl(l), P, l);
  for (std::size_t s = 0; s < graphfm_sweeps(model.config()); ++s) {
    const auto p = "det.s" + lvl(s);
    intra(p + ".top", L);
    for (std::size_t l = L - 1; l >= 1; --l) {
      down(p + ".down." + lvl(l), l);
      intra(p + ".down_intra." + lvl(l), l);
    }
    intra(p + ".bottom", 1);
    for (std::size_t l = 2; l <= L; ++l) {
      up(p + ".up." + lvl(l), P, l);
      intra(p + ".up_intra." + lvl(l), l);
    }
  }
  for (std::size_t l = L - 1; l >= 1; --l) {
    const auto set = mesh::down_name(static_cast<int>(l + 1));
    r.node[l] = pass.layer("det.final_down." + lvl(l), I, set, r.node[l + 1], r.edge.at(set), r.node[l]).receivers;
  }
  return pass.finish("det", r.node[0], r.node[1], r, P, in.x_prev1);
}

Prediction step_deterministic(const Model& model, const ParamStore& params, const StepInput& in) {
  switch (model.config().variant) {
    case Variant::graphcast: return step_multiscale(model, params, in);
    case Variant::graphfm: return step_graphfm(model, params, in);
    default:
      throw std::invalid_argument(std::string("step_deterministic: variant ") + variant_name(model.config().variant) +
                                  " is probabilistic");
  }
}

num::DiagGaussian latent_map_mean(const Model& model, const ParamStore& params, const StepInput& in) {
  require_variant(model, {Variant::graph_efm, Variant::graph_efm_ms}, "latent_map_mean");
  const auto shape = model.latent_shape();
  if (model.config().static_prior) return {Tensor::zeros(shape), Tensor::full(shape, 1.0)};
  const Pass pass(model, params);
  const auto h_grid = pass.embed_grid("embed.grid", {in.x_prev2, in.x_prev1, in.forcing});
  auto mean = model.config().variant == Variant::graph_efm
                  ? hierarchical_encoder(pass, "prior", h_grid)
                  : multiscale_encoder(pass, "prior", model.config().ms_latent_steps, h_grid);
  return {mean, Tensor::full(shape, 1.0)};
}

num::DiagGaussian variational_params(const Model& model, const ParamStore& params, const StepInput& in,
                                     const Tensor& x_target) {
  require_variant(model, {Variant::graph_efm, Variant::graph_efm_ms}, "variational_params");
  const Pass pass(model, params);
  const auto h_grid = pass.embed_grid("var.embed.grid", {in.x_prev2, in.x_prev1, x_target, in.forcing});
  auto out = model.config().variant == Variant::graph_efm
                 ? hierarchical_encoder(pass, "var", h_grid)
                 : multiscale_encoder(pass, "var", model.config().ms_variational_steps, h_grid);
  const auto d = model.config().d_z;
  return {num::slice_cols(out, 0, d), num::softplus(num::slice_cols(out, d, d))};
}

Prediction predictor(const Model& model, const ParamStore& params, const Tensor& z, const StepInput& in) {
  require_variant(model, {Variant::graph_efm, Variant::graph_efm_ms}, "predictor");
  if (z.shape() != model.latent_shape()) {
    throw num::ShapeError("predictor: Z has shape " + num::shape_str(z.shape()) + ", expected " +
                          num::shape_str(model.latent_shape()));
  }
  const Pass pass(model, params);
  const auto I = LayerKind::interaction, P = LayerKind::propagation;
  auto r = pass.static_reps();
  r.node[0] = pass.embed_grid("embed.grid", {in.x_prev2, in.x_prev1, in.forcing});

  if (model.config().variant == Variant::graph_efm_ms) {
    r.node[1] = z;
    pass.update(r, "pred.g2m", P, mesh::kG2M, 0, 1);
    for (std::size_t k = 0; k < model.config().ms_predictor_steps; ++k) {
      pass.update(r, "pred.m2m." + lvl(k), I, mesh::m2m_name(1), 1, 1);
    }
    return pass.finish("pred", r.node[0], r.node[1], r, P, in.x_prev1);
  }

  const auto L = model.graph().num_levels;
  pass.update(r, "pred.g2m", P, mesh::kG2M, 0, 1);
  for (std::size_t s = 0; s < model.config().predictor_sweeps; ++s) {
    const auto p = "pred.s" + lvl(s);
    for (std::size_t l = 1; l < L; ++l) {
      pass.update(r, p + ".up_intra." + lvl(l), I, mesh::m2m_name(static_cast<int>(l)), l, l);
      if (s == 0 && l + 1 == L) r.node[L] = z;
      pass.update(r, p + ".up." + lvl(l + 1), I, mesh::up_name(static_cast<int>(l)), l, l + 1);
    }
    pass.update(r, p + ".top", I, mesh::m2m_name(static_cast<int>(L)), L, L);
    for (std::size_t l = L - 1; l >= 1; --l) {
      pass.update(r, p + ".down." + lvl(l), P, mesh::down_name(static_cast<int>(l + 1)), l + 1, l);
      pass.update(r, p + ".down_intra." + lvl(l), P, mesh::m2m_name(static_cast<int>(l)), l, l);
    }
  }
  return pass.finish("pred", r.node[0], r.node[1], r, P, in.x_prev1);
}

}  // namespace gefm::models
