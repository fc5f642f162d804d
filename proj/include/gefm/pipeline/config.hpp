#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gefm/meshgraph/graph.hpp"
#include "gefm/models/model.hpp"
#include "gefm/objectives/schedule.hpp"

namespace gefm::pipeline {

/// Everything needed to rebuild a mesh graph for a data grid.
struct GraphSpec {
  mesh::Geometry geometry = mesh::Geometry::spherical;
  mesh::Kind kind = mesh::Kind::hierarchical;
  std::size_t refinements = 1;      // global: icosphere refinements
  std::size_t levels = 2;           // hierarchy levels (global and LAM)
  std::size_t multiscale_levels = 2;  // LAM: levels merged into a multiscale mesh
  std::size_t mesh_n = 0;           // LAM: finest lattice extent (0 = automatic)
  double extent_padding = 0.5;      // LAM: mesh extent beyond the grid nodes, in cells

  bool operator==(const GraphSpec&) const = default;
};

mesh::MeshGraph build_graph(const GraphSpec& spec, const mesh::GridSpec& grid);

nlohmann::json graph_spec_to_json(const GraphSpec& spec);
GraphSpec graph_spec_from_json(const nlohmann::json& j);

enum class SweepMode { resample, prefix };

struct EvalConfig {
  std::size_t ensemble = 20;
  std::size_t lead_times = 4;
  std::size_t init_stride = 1;
  std::vector<std::size_t> sweep_sizes;  // empty: no ensemble-size sweep
  SweepMode sweep_mode = SweepMode::resample;
  std::uint64_t seed = 1234;
  std::size_t threads = 0;
  std::string split = "test";
};

struct RunConfig {
  std::string name = "run";
  GraphSpec graph;
  models::ModelConfig model;  // state_dim and forcing_dim come from the dataset
  models::InitMode init = models::InitMode::standard;
  std::vector<objectives::StageConfig> stages;
  double weight_decay = 0.0;
  std::size_t batch_size = 1;
  /// Length of the source windows that training offsets are drawn from; 0
  /// uses two history states plus the longest unroll.
  std::size_t window_length = 0;
  std::size_t boundary_width = 0;
  std::uint64_t seed = 0;
  EvalConfig eval;
  std::string data_path, graph_path, out_dir;
};

/// Parses and validates. Throws std::invalid_argument naming the field.
RunConfig run_config_from_json(const std::string& text);
nlohmann::json run_config_to_json(const RunConfig& config);

/// Stage modes must suit the variant, the graph kind must match it, and
/// the numeric fields must be in range.
void validate_run_config(const RunConfig& config);

}  // namespace gefm::pipeline
