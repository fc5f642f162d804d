#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gefm/meshgraph/geometry.hpp"
#include "gefm/meshgraph/grid.hpp"
#include "gefm/meshgraph/levels.hpp"

namespace gefm::mesh {

/// A graph node. Level 0 is the grid; mesh levels run from 1 (finest) to L
/// (coarsest). `pos` holds (lat, lon) in degrees on the sphere, (x, y) in the
/// plane.
struct Node {
  std::uint32_t id = 0;
  int level = 0;
  double pos[2] = {0.0, 0.0};
};

/// A named set of directed edges between two node levels. Edge endpoints are
/// local indices within the sender and receiver levels.
struct EdgeSet {
  std::string name;
  int sender_level = 0;
  int receiver_level = 0;
  EdgeList edges;
};

/// Per-level node features and per-edge-set edge features, each stored
/// row-major with a fixed width.
struct StaticFeatures {
  std::size_t node_width = 0;
  std::size_t edge_width = 0;
  std::vector<std::vector<double>> node;  // index: level (0 = grid)
  std::vector<std::vector<double>> edge;  // index: edge set, as in MeshGraph::edge_sets
  double length_scale = 1.0;              // the longest mesh edge before normalization
};

struct MeshGraph {
  Kind kind = Kind::hierarchical;
  Geometry geometry = Geometry::spherical;
  GridSpec grid;
  std::size_t num_levels = 0;       // mesh levels present as node sets
  std::vector<std::size_t> level_sizes;  // index: level (0 = grid)
  /// Unit vectors (sphere) or (x, y, 0) (plane) per level, used for geometry.
  std::vector<std::vector<Vec3>> positions;
  std::vector<EdgeSet> edge_sets;
  StaticFeatures features;

  std::size_t level_size(int level) const { return level_sizes.at(static_cast<std::size_t>(level)); }
  /// Global id of the first node of `level`: grid first, then mesh levels
  /// from coarsest to finest.
  std::size_t level_offset(int level) const;
  std::size_t total_nodes() const;
  std::vector<Node> nodes() const;

  const EdgeSet& edge_set(const std::string& name) const;
  bool has_edge_set(const std::string& name) const;
  std::size_t edge_set_index(const std::string& name) const;
};

std::string m2m_name(int level);
std::string up_name(int from_level);
std::string down_name(int from_level);
inline const char* kG2M = "G2M";
inline const char* kM2G = "M2G";

struct GlobalGraphOptions {
  std::size_t refinements = 4;
  /// Number of finest icosphere levels used by the hierarchical graph.
  std::size_t hierarchy_levels = 4;
  double interlevel_factor = 1.1;
  double g2m_factor = 0.6;
};

struct LamGraphOptions {
  /// Finest mesh lattice extents; 0 picks the largest power of three that
  /// fits in the grid's shorter side.
  std::size_t mesh_nx = 0, mesh_ny = 0;
  std::size_t hierarchy_levels = 3;
  std::size_t multiscale_levels = 4;
  double g2m_factor = 0.67;
  std::size_t m2g_neighbours = 4;
  /// Grows the mesh extent beyond the outermost grid nodes by this many grid
  /// cells on every side. Zero lays the mesh over the node coordinates.
  double extent_padding = 0.0;
};

MeshGraph build_global_graph(Kind kind, const GridSpec& grid, const GlobalGraphOptions& options);
MeshGraph build_lam_graph(Kind kind, const GridSpec& grid, const LamGraphOptions& options);

/// Node features: (cos lat, sin lon, cos lon) on the sphere, coordinates over
/// the largest absolute coordinate in the plane. Edge features: length and
/// receiver-minus-sender displacement, divided by the longest mesh edge.
StaticFeatures compute_static_features(const MeshGraph& graph);

struct EdgeSetStats {
  std::string name;
  std::size_t edges = 0;
  std::size_t min_in_degree = 0, max_in_degree = 0;    // over receiver-level nodes
  std::size_t min_out_degree = 0, max_out_degree = 0;  // over sender-level nodes
};

struct GraphStats {
  std::vector<std::size_t> level_nodes;  // index: level (0 = grid)
  std::vector<EdgeSetStats> edge_sets;
  std::size_t mesh_nodes = 0;
  std::size_t mesh_edges = 0;  // all edge sets except G2M and M2G
  std::size_t grid_nodes = 0;

  std::string to_text() const;
};

GraphStats graph_stats(const MeshGraph& graph);

/// Structural checks: edge endpoints in range, no duplicate edges, Down sets
/// equal reversed Up sets, expected edge sets present for the kind. Returns
/// a list of problems (empty when valid).
std::vector<std::string> validate(const MeshGraph& graph);

/// FNV-1a over kind, geometry, grid, level sizes and every edge.
std::uint64_t graph_hash(const MeshGraph& graph);

std::string to_json(const MeshGraph& graph);
MeshGraph from_json(const std::string& text);
void save_graph(const MeshGraph& graph, const std::string& path);
MeshGraph load_graph(const std::string& path);

}  // namespace gefm::mesh
