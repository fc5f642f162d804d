#include "gefm/meshgraph/grid.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace gefm::mesh {

GridSpec GridSpec::latlon_with_poles(std::size_t rows, std::size_t cols) {
  if (rows < 2 || cols < 1) throw std::invalid_argument("latlon grid needs >= 2 rows and >= 1 column");
  GridSpec g;
  g.geometry = Geometry::spherical;
  g.rows = rows;
  g.cols = cols;
  g.lat0 = -90.0;
  g.dlat = 180.0 / static_cast<double>(rows - 1);
  g.lon0 = 0.0;
  g.dlon = 360.0 / static_cast<double>(cols);
  return g;
}

GridSpec GridSpec::latlon_cell_centred(std::size_t rows, std::size_t cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("latlon grid needs >= 1 row and column");
  GridSpec g;
  g.geometry = Geometry::spherical;
  g.rows = rows;
  g.cols = cols;
  g.dlat = 180.0 / static_cast<double>(rows);
  g.lat0 = -90.0 + g.dlat / 2.0;
  g.dlon = 360.0 / static_cast<double>(cols);
  g.lon0 = g.dlon / 2.0;
  return g;
}

GridSpec GridSpec::planar(std::size_t rows, std::size_t cols) {
  GridSpec g;
  g.geometry = Geometry::planar;
  g.rows = rows;
  g.cols = cols;
  return g;
}

std::vector<std::pair<double, double>> grid_coordinates(const GridSpec& grid) {
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      if (grid.geometry == Geometry::spherical) {
        out.emplace_back(grid.lat0 + static_cast<double>(r) * grid.dlat,
                         wrap_lon(grid.lon0 + static_cast<double>(c) * grid.dlon));
      } else {
        out.emplace_back(static_cast<double>(c), static_cast<double>(r));
      }
    }
  }
  return out;
}

std::vector<Vec3> grid_positions(const GridSpec& grid) {
  std::vector<Vec3> out;
  out.reserve(grid.size());
  for (const auto& [a, b] : grid_coordinates(grid)) {
    out.push_back(grid.geometry == Geometry::spherical ? latlon_to_xyz(a, b) : Vec3{a, b, 0.0});
  }
  return out;
}

Extent grid_extent(const GridSpec& grid) {
  if (grid.geometry != Geometry::planar) throw std::invalid_argument("grid_extent: planar grids only");
  if (grid.rows < 2 || grid.cols < 2) throw std::invalid_argument("grid_extent: degenerate grid");
  return {0.0, static_cast<double>(grid.cols - 1), 0.0, static_cast<double>(grid.rows - 1)};
}

EdgeList connect_grid_to_mesh(const std::vector<Vec3>& grid, const MeshLevel& mesh, double radius) {
  PointIndex index(mesh.pos, radius);
  EdgeList edges;
  for (std::uint32_t g = 0; g < grid.size(); ++g) {
    const auto targets = index.within(grid[g], radius);
    if (targets.empty()) {
      throw std::runtime_error("connect_grid_to_mesh: grid node " + std::to_string(g) +
                               " has no mesh node within the radius");
    }
    for (auto m : targets) edges.emplace_back(g, m);
  }
  return edges;
}

namespace {

// Smallest of the three barycentric-sign tests, scaled by the triangle's
// orientation; non-negative when p lies inside the spherical triangle.
double containment_margin(const MeshLevel& level, const Face& f, Vec3 p) {
  const Vec3 a = level.pos[f[0]], b = level.pos[f[1]], c = level.pos[f[2]];
  const double orient = dot(a, cross(b, c)) > 0 ? 1.0 : -1.0;
  if (dot(p, a + b + c) <= 0) return -std::numeric_limits<double>::infinity();
  return orient * std::min({dot(p, cross(a, b)), dot(p, cross(b, c)), dot(p, cross(c, a))});
}

}  // namespace

EdgeList connect_mesh_to_grid_containing(const std::vector<MeshLevel>& ico_levels,
                                         const std::vector<Vec3>& grid) {
  if (ico_levels.empty()) throw std::invalid_argument("connect_mesh_to_grid_containing: no levels");
  const auto& finest = ico_levels.back();
  EdgeList edges;
  edges.reserve(grid.size() * 3);
  for (std::uint32_t g = 0; g < grid.size(); ++g) {
    const Vec3 p = grid[g];
    std::size_t best = 0;
    double margin = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < ico_levels[0].faces.size(); ++f) {
      const double m = containment_margin(ico_levels[0], ico_levels[0].faces[f], p);
      if (m > margin) margin = m, best = f;
    }
    for (std::size_t l = 1; l < ico_levels.size(); ++l) {
      const std::size_t parent = best;
      margin = -std::numeric_limits<double>::infinity();
      for (std::size_t f = 4 * parent; f < 4 * parent + 4; ++f) {
        const double m = containment_margin(ico_levels[l], ico_levels[l].faces[f], p);
        if (m > margin) margin = m, best = f;
      }
    }
    if (margin < -1e-9) {
      throw std::runtime_error("connect_mesh_to_grid_containing: no triangle contains grid node " +
                               std::to_string(g));
    }
    for (auto v : finest.faces[best]) edges.emplace_back(v, g);
  }
  canonicalize(edges);
  if (edges.size() != grid.size() * 3) {
    throw std::runtime_error("connect_mesh_to_grid_containing: degenerate triangle");
  }
  return edges;
}

EdgeList connect_mesh_to_grid_nearest(const MeshLevel& mesh, const std::vector<Vec3>& grid,
                                      std::size_t k) {
  PointIndex index(mesh.pos, std::max(mesh.max_edge_length(), 1e-12));
  EdgeList edges;
  edges.reserve(grid.size() * k);
  for (std::uint32_t g = 0; g < grid.size(); ++g) {
    for (auto m : index.nearest(grid[g], k)) edges.emplace_back(m, g);
  }
  canonicalize(edges);
  return edges;
}

}  // namespace gefm::mesh
