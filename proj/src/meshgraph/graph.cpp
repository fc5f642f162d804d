#include "gefm/meshgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gefm::mesh {

std::string m2m_name(int level) { return "M2M(" + std::to_string(level) + ")"; }
std::string up_name(int from_level) {
  return "Up(" + std::to_string(from_level) + "->" + std::to_string(from_level + 1) + ")";
}
std::string down_name(int from_level) {
  return "Down(" + std::to_string(from_level) + "->" + std::to_string(from_level - 1) + ")";
}

std::size_t MeshGraph::level_offset(int level) const {
  if (level == 0) return 0;
  std::size_t offset = level_sizes.at(0);
  for (int l = static_cast<int>(num_levels); l > level; --l) offset += level_sizes.at(static_cast<std::size_t>(l));
  return offset;
}

std::size_t MeshGraph::total_nodes() const {
  std::size_t n = 0;
  for (auto s : level_sizes) n += s;
  return n;
}

std::vector<Node> MeshGraph::nodes() const {
  std::vector<Node> out(total_nodes());
  for (int level = 0; level <= static_cast<int>(num_levels); ++level) {
    const auto offset = level_offset(level);
    const auto& pts = positions.at(static_cast<std::size_t>(level));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Node& n = out[offset + i];
      n.id = static_cast<std::uint32_t>(offset + i);
      n.level = level;
      if (geometry == Geometry::spherical) {
        const auto [lat, lon] = xyz_to_latlon(pts[i]);
        n.pos[0] = lat;
        n.pos[1] = lon;
      } else {
        n.pos[0] = pts[i].x;
        n.pos[1] = pts[i].y;
      }
    }
  }
  return out;
}

std::size_t MeshGraph::edge_set_index(const std::string& name) const {
  for (std::size_t i = 0; i < edge_sets.size(); ++i)
    if (edge_sets[i].name == name) return i;
  throw std::out_of_range("graph has no edge set '" + name + "'");
}

const EdgeSet& MeshGraph::edge_set(const std::string& name) const {
  return edge_sets[edge_set_index(name)];
}

bool MeshGraph::has_edge_set(const std::string& name) const {
  return std::any_of(edge_sets.begin(), edge_sets.end(), [&](const auto& e) { return e.name == name; });
}

namespace {

void add_hierarchy_sets(MeshGraph& g, const std::vector<MeshLevel>& levels_fine_first,
                        const std::vector<EdgeList>& up) {
  for (std::size_t l = 0; l < levels_fine_first.size(); ++l) {
    const int level = static_cast<int>(l + 1);
    g.edge_sets.push_back({m2m_name(level), level, level, levels_fine_first[l].edges});
  }
  for (std::size_t l = 0; l < up.size(); ++l) {
    const int level = static_cast<int>(l + 1);
    g.edge_sets.push_back({up_name(level), level, level + 1, up[l]});
    g.edge_sets.push_back({down_name(level + 1), level + 1, level, reversed(up[l])});
  }
}

void set_levels(MeshGraph& g, const std::vector<Vec3>& grid_pos,
                const std::vector<MeshLevel>& levels_fine_first) {
  g.num_levels = levels_fine_first.size();
  g.level_sizes = {grid_pos.size()};
  g.positions = {grid_pos};
  for (const auto& l : levels_fine_first) {
    g.level_sizes.push_back(l.size());
    g.positions.push_back(l.pos);
  }
}

}  // namespace

MeshGraph build_global_graph(Kind kind, const GridSpec& grid, const GlobalGraphOptions& options) {
  if (grid.geometry != Geometry::spherical) throw std::invalid_argument("global graph needs a spherical grid");
  const auto ico = build_icosphere_levels(options.refinements);
  const auto& finest = ico.back();
  const auto grid_pos = grid_positions(grid);

  MeshGraph g;
  g.kind = kind;
  g.geometry = Geometry::spherical;
  g.grid = grid;
  if (kind == Kind::hierarchical) {
    if (options.hierarchy_levels < 1 || options.hierarchy_levels > ico.size()) {
      throw std::invalid_argument("hierarchy_levels must lie in [1, refinements + 1]");
    }
    std::vector<MeshLevel> levels;
    for (std::size_t l = 0; l < options.hierarchy_levels; ++l) levels.push_back(ico[ico.size() - 1 - l]);
    std::vector<EdgeList> up;
    for (std::size_t l = 0; l + 1 < levels.size(); ++l)
      up.push_back(connect_up_radius(levels[l], levels[l + 1], options.interlevel_factor));
    set_levels(g, grid_pos, levels);
    add_hierarchy_sets(g, levels, up);
  } else {
    const auto merged = merge_multiscale(ico);
    set_levels(g, grid_pos, {merged});
    g.edge_sets.push_back({m2m_name(1), 1, 1, merged.edges});
  }
  g.edge_sets.push_back(
      {kG2M, 0, 1, connect_grid_to_mesh(grid_pos, finest, options.g2m_factor * finest.max_edge_length())});
  g.edge_sets.push_back({kM2G, 1, 0, connect_mesh_to_grid_containing(ico, grid_pos)});
  g.features = compute_static_features(g);
  return g;
}

MeshGraph build_lam_graph(Kind kind, const GridSpec& grid, const LamGraphOptions& options) {
  if (grid.geometry != Geometry::planar) throw std::invalid_argument("LAM graph needs a planar grid");
  auto extent = grid_extent(grid);
  extent.xmin -= options.extent_padding;
  extent.xmax += options.extent_padding;
  extent.ymin -= options.extent_padding;
  extent.ymax += options.extent_padding;
  std::size_t nx = options.mesh_nx, ny = options.mesh_ny;
  if (nx == 0 || ny == 0) {
    std::size_t side = 1;
    while (side * 3 <= std::min(grid.rows, grid.cols)) side *= 3;
    nx = ny = side;
  }
  const std::size_t count = kind == Kind::hierarchical ? options.hierarchy_levels : options.multiscale_levels;
  auto coarse_first = build_lam_levels(nx, ny, count, extent);
  const MeshLevel finest = coarse_first.back();
  const auto grid_pos = grid_positions(grid);

  MeshGraph g;
  g.kind = kind;
  g.geometry = Geometry::planar;
  g.grid = grid;
  if (kind == Kind::hierarchical) {
    std::vector<MeshLevel> levels(coarse_first.rbegin(), coarse_first.rend());
    std::vector<EdgeList> up;
    for (std::size_t l = 0; l + 1 < levels.size(); ++l) up.push_back(connect_up_nearest(levels[l], levels[l + 1]));
    set_levels(g, grid_pos, levels);
    add_hierarchy_sets(g, levels, up);
  } else {
    const auto merged = merge_multiscale(coarse_first);
    set_levels(g, grid_pos, {merged});
    g.edge_sets.push_back({m2m_name(1), 1, 1, merged.edges});
  }
  g.edge_sets.push_back(
      {kG2M, 0, 1, connect_grid_to_mesh(grid_pos, finest, options.g2m_factor * finest.max_axis_spacing())});
  g.edge_sets.push_back({kM2G, 1, 0, connect_mesh_to_grid_nearest(finest, grid_pos, options.m2g_neighbours)});
  g.features = compute_static_features(g);
  return g;
}

namespace {

bool is_mesh_set(const EdgeSet& e) { return e.sender_level > 0 && e.receiver_level > 0; }

}  // namespace

StaticFeatures compute_static_features(const MeshGraph& graph) {
  if (graph.total_nodes() == 0) throw std::invalid_argument("compute_static_features: empty graph");
  StaticFeatures f;
  const bool sphere = graph.geometry == Geometry::spherical;
  f.node_width = sphere ? 3 : 2;
  f.edge_width = sphere ? 4 : 3;

  double max_coord = 0.0;
  for (const auto& pts : graph.positions)
    for (const auto& p : pts) max_coord = std::max({max_coord, std::fabs(p.x), std::fabs(p.y)});
  if (max_coord == 0.0) max_coord = 1.0;
  for (const auto& pts : graph.positions) {
    std::vector<double> rows;
    rows.reserve(pts.size() * f.node_width);
    for (const auto& p : pts) {
      if (sphere) {
        const double lat = std::asin(std::clamp(p.z, -1.0, 1.0));
        const double lon = std::atan2(p.y, p.x);
        rows.insert(rows.end(), {std::cos(lat), std::sin(lon), std::cos(lon)});
      } else {
        rows.insert(rows.end(), {p.x / max_coord, p.y / max_coord});
      }
    }
    f.node.push_back(std::move(rows));
  }

  auto endpoints = [&](const EdgeSet& e, const Edge& edge) {
    return std::pair{graph.positions[static_cast<std::size_t>(e.sender_level)][edge.first],
                     graph.positions[static_cast<std::size_t>(e.receiver_level)][edge.second]};
  };
  double longest = 0.0;
  for (const auto& e : graph.edge_sets) {
    if (!is_mesh_set(e)) continue;
    for (const auto& edge : e.edges) {
      const auto [s, r] = endpoints(e, edge);
      longest = std::max(longest, distance(s, r));
    }
  }
  f.length_scale = longest > 0 ? longest : 1.0;
  for (const auto& e : graph.edge_sets) {
    std::vector<double> rows;
    rows.reserve(e.edges.size() * f.edge_width);
    for (const auto& edge : e.edges) {
      const auto [s, r] = endpoints(e, edge);
      const Vec3 d = (1.0 / f.length_scale) * (r - s);
      rows.push_back(distance(s, r) / f.length_scale);
      rows.push_back(d.x);
      rows.push_back(d.y);
      if (sphere) rows.push_back(d.z);
    }
    f.edge.push_back(std::move(rows));
  }
  return f;
}

GraphStats graph_stats(const MeshGraph& graph) {
  GraphStats s;
  s.level_nodes = graph.level_sizes;
  s.grid_nodes = graph.level_sizes.empty() ? 0 : graph.level_sizes[0];
  for (std::size_t l = 1; l < graph.level_sizes.size(); ++l) s.mesh_nodes += graph.level_sizes[l];
  for (const auto& e : graph.edge_sets) {
    EdgeSetStats es;
    es.name = e.name;
    es.edges = e.edges.size();
    std::vector<std::size_t> in(graph.level_size(e.receiver_level), 0), out(graph.level_size(e.sender_level), 0);
    for (const auto& [a, b] : e.edges) {
      ++out[a];
      ++in[b];
    }
    if (!in.empty()) {
      es.min_in_degree = *std::min_element(in.begin(), in.end());
      es.max_in_degree = *std::max_element(in.begin(), in.end());
    }
    if (!out.empty()) {
      es.min_out_degree = *std::min_element(out.begin(), out.end());
      es.max_out_degree = *std::max_element(out.begin(), out.end());
    }
    if (is_mesh_set(e)) s.mesh_edges += es.edges;
    s.edge_sets.push_back(es);
  }
  return s;
}

std::string GraphStats::to_text() const {
  std::ostringstream os;
  os << "grid nodes: " << grid_nodes << "\n";
  for (std::size_t l = 1; l < level_nodes.size(); ++l) os << "level " << l << " nodes: " << level_nodes[l] << "\n";
  os << "mesh nodes: " << mesh_nodes << "\nmesh edges: " << mesh_edges << "\n";
  for (const auto& e : edge_sets) {
    os << e.name << ": " << e.edges << " edges, in-degree " << e.min_in_degree << ".." << e.max_in_degree
       << ", out-degree " << e.min_out_degree << ".." << e.max_out_degree << "\n";
  }
  return os.str();
}

std::vector<std::string> validate(const MeshGraph& graph) {
  std::vector<std::string> problems;
  if (graph.level_sizes.size() != graph.num_levels + 1 || graph.positions.size() != graph.num_levels + 1) {
    problems.push_back("level bookkeeping does not match num_levels");
    return problems;
  }
  for (std::size_t l = 0; l < graph.positions.size(); ++l) {
    if (graph.positions[l].size() != graph.level_sizes[l]) problems.push_back("positions of level " + std::to_string(l) + " mis-sized");
  }
  for (const auto& e : graph.edge_sets) {
    const auto max_l = static_cast<int>(graph.num_levels);
    if (e.sender_level < 0 || e.sender_level > max_l || e.receiver_level < 0 || e.receiver_level > max_l) {
      problems.push_back(e.name + ": level out of range");
      continue;
    }
    const auto ns = graph.level_size(e.sender_level), nr = graph.level_size(e.receiver_level);
    for (const auto& [a, b] : e.edges) {
      if (a >= ns || b >= nr) {
        problems.push_back(e.name + ": endpoint out of range");
        break;
      }
    }
    auto sorted = e.edges;
    canonicalize(sorted);
    if (sorted.size() != e.edges.size()) problems.push_back(e.name + ": duplicate edges");
  }
  const auto L = static_cast<int>(graph.num_levels);
  if (graph.kind == Kind::multiscale && L != 1) problems.push_back("multiscale graph must have one mesh level");
  for (int l = 1; l <= L; ++l)
    if (!graph.has_edge_set(m2m_name(l))) problems.push_back("missing " + m2m_name(l));
  for (int l = 1; l < L; ++l) {
    if (!graph.has_edge_set(up_name(l)) || !graph.has_edge_set(down_name(l + 1))) {
      problems.push_back("missing inter-level sets between " + std::to_string(l) + " and " + std::to_string(l + 1));
      continue;
    }
    auto up = reversed(graph.edge_set(up_name(l)).edges);
    auto down = graph.edge_set(down_name(l + 1)).edges;
    canonicalize(down);
    if (up != down) problems.push_back(down_name(l + 1) + " is not the reversal of " + up_name(l));
  }
  if (!graph.has_edge_set(kG2M)) problems.push_back("missing G2M");
  if (!graph.has_edge_set(kM2G)) problems.push_back("missing M2G");
  return problems;
}

namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void byte(unsigned char b) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<unsigned char>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u64(s.size());
    for (char c : s) byte(static_cast<unsigned char>(c));
  }
};

}  // namespace

std::uint64_t graph_hash(const MeshGraph& graph) {
  Fnv f;
  f.u64(static_cast<std::uint64_t>(graph.kind));
  f.u64(static_cast<std::uint64_t>(graph.geometry));
  f.u64(graph.grid.rows);
  f.u64(graph.grid.cols);
  for (auto s : graph.level_sizes) f.u64(s);
  for (const auto& e : graph.edge_sets) {
    f.str(e.name);
    f.u64(static_cast<std::uint64_t>(e.sender_level));
    f.u64(static_cast<std::uint64_t>(e.receiver_level));
    f.u64(e.edges.size());
    for (const auto& [a, b] : e.edges) {
      f.u64(a);
      f.u64(b);
    }
  }
  return f.h;
}

}  // namespace gefm::mesh
