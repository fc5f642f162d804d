#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gefm/layers/gnn.hpp"
#include "gefm/meshgraph/graph.hpp"
#include "gefm/numcore/gaussian.hpp"
#include "gefm/numcore/params.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::models {

enum class Variant {
  graphcast,     // deterministic, multiscale mesh
  graphfm,       // deterministic, hierarchical mesh
  graph_efm,     // latent-variable, hierarchical mesh
  graph_efm_ms,  // latent-variable, multiscale mesh
};

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);
bool is_probabilistic(Variant v);
mesh::Kind required_graph_kind(Variant v);

enum class InitMode {
  standard,  // random embedders; every other block starts with an exactly zero output
  zeros,     // every parameter zero
  random,    // every parameter random (no zero outputs anywhere)
};

struct ModelConfig {
  Variant variant = Variant::graphfm;
  std::size_t state_dim = 0;    // d_x
  std::size_t forcing_dim = 0;  // width of one windowed forcing row
  std::size_t d_z = 16;
  /// Mesh processing steps: message-passing steps on the multiscale mesh, or
  /// twice the number of down-up sweeps on a hierarchy (must then be even).
  std::size_t processor_steps = 4;
  std::size_t predictor_sweeps = 1;
  std::size_t ms_latent_steps = 2;
  std::size_t ms_predictor_steps = 4;
  std::size_t ms_variational_steps = 4;
  /// Heads additionally emit a per-variable, per-node standard deviation.
  bool output_sigma = false;
  /// The latent map ignores its inputs and always returns N(0, I).
  bool static_prior = false;

  bool operator==(const ModelConfig&) const = default;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

/// Graph data in the form the forward passes consume. Built once per graph.
struct GraphContext {
  mesh::Kind kind = mesh::Kind::hierarchical;
  std::size_t num_levels = 0;
  std::vector<std::size_t> level_sizes;  // index: level (0 = grid)
  std::map<std::string, layers::EdgeIndex> edges;
  std::map<std::string, num::Tensor> edge_features;
  std::vector<num::Tensor> node_features;  // index: level
  std::size_t node_width = 0, edge_width = 0;
  std::uint64_t graph_hash = 0;

  std::size_t grid_size() const { return level_sizes.at(0); }
};

std::shared_ptr<const GraphContext> make_graph_context(const mesh::MeshGraph& graph);

class Model {
 public:
  Model(ModelConfig config, std::shared_ptr<const GraphContext> graph);

  const ModelConfig& config() const { return config_; }
  const GraphContext& graph() const { return *graph_; }
  std::size_t latent_rows() const;
  num::Shape latent_shape() const { return {latent_rows(), config_.d_z}; }

  num::ParamStore init_params(InitMode mode, std::uint64_t seed) const;

 private:
  ModelConfig config_;
  std::shared_ptr<const GraphContext> graph_;
};

struct StepInput {
  num::Tensor x_prev2;  // X^{t-2}, [grid nodes, d_x]
  num::Tensor x_prev1;  // X^{t-1}
  num::Tensor forcing;  // windowed F^t, [grid nodes, forcing_dim]
};

struct Prediction {
  num::Tensor mean;   // X^{t-1} + increment
  num::Tensor sigma;  // undefined unless the model outputs sigma
};

/// GraphCast-style single step on a multiscale mesh.
Prediction step_multiscale(const Model& model, const num::ParamStore& params, const StepInput& in);
/// Graph-FM single step: sweeps through a mesh hierarchy.
Prediction step_graphfm(const Model& model, const num::ParamStore& params, const StepInput& in);
/// Dispatches on the deterministic variant.
Prediction step_deterministic(const Model& model, const num::ParamStore& params, const StepInput& in);

/// Conditional prior over Z: mean from the latent map, unit standard deviation.
num::DiagGaussian latent_map_mean(const Model& model, const num::ParamStore& params, const StepInput& in);
/// Maps a latent sample and the inputs to the next state.
Prediction predictor(const Model& model, const num::ParamStore& params, const num::Tensor& z, const StepInput& in);
/// Variational distribution over Z, conditioned also on the target state.
num::DiagGaussian variational_params(const Model& model, const num::ParamStore& params, const StepInput& in,
                                     const num::Tensor& x_target);

}  // namespace gefm::models
