#pragma once

// Small graphs and inputs shared by the model-level tests.

#include <memory>

#include "gefm/meshgraph/graph.hpp"
#include "gefm/models/model.hpp"
#include "support/reference.hpp"

namespace gefm::testing {

/// 12 x 24 cell-centred global grid with a 42/12-node icosphere mesh.
inline mesh::MeshGraph toy_global(mesh::Kind kind, std::size_t levels = 2, std::size_t refinements = 1) {
  return mesh::build_global_graph(kind, mesh::GridSpec::latlon_cell_centred(12, 24),
                                  {.refinements = refinements, .hierarchy_levels = levels});
}

inline std::shared_ptr<const models::GraphContext> toy_context(mesh::Kind kind, std::size_t levels = 2,
                                                               std::size_t refinements = 1) {
  return models::make_graph_context(toy_global(kind, levels, refinements));
}

inline models::ModelConfig toy_config(models::Variant variant) {
  models::ModelConfig c;
  c.variant = variant;
  c.state_dim = 3;
  c.forcing_dim = 2;
  c.d_z = 8;
  c.processor_steps = variant == models::Variant::graphcast ? 3 : 2;
  c.ms_latent_steps = 1;
  c.ms_predictor_steps = 2;
  c.ms_variational_steps = 1;
  return c;
}

inline models::StepInput toy_input(const models::Model& m, std::uint64_t seed) {
  const auto n = m.graph().grid_size();
  const auto dx = m.config().state_dim;
  return {random_tensor({n, dx}, seed), random_tensor({n, dx}, seed + 1),
          random_tensor({n, m.config().forcing_dim}, seed + 2)};
}

}  // namespace gefm::testing
