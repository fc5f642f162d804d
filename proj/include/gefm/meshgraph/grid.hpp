#pragma once

#include <cstddef>
#include <vector>

#include "gefm/meshgraph/geometry.hpp"
#include "gefm/meshgraph/levels.hpp"

namespace gefm::mesh {

/// Regular data lattice, nodes numbered row-major.
///
/// Spherical: row r sits at latitude lat0 + r*dlat and column c at longitude
/// lon0 + c*dlon (degrees). Planar: node (r, c) sits at x = c, y = r.
struct GridSpec {
  Geometry geometry = Geometry::planar;
  std::size_t rows = 0, cols = 0;
  double lat0 = 0.0, dlat = 0.0, lon0 = 0.0, dlon = 0.0;

  std::size_t size() const { return rows * cols; }

  /// Equiangular grid whose first and last rows lie on the poles.
  static GridSpec latlon_with_poles(std::size_t rows, std::size_t cols);
  /// Equiangular grid of cell centres (no node on a pole).
  static GridSpec latlon_cell_centred(std::size_t rows, std::size_t cols);
  static GridSpec planar(std::size_t rows, std::size_t cols);

  bool operator==(const GridSpec&) const = default;
};

/// Unit vectors (spherical) or (x, y, 0) (planar), row-major.
std::vector<Vec3> grid_positions(const GridSpec& grid);
/// (lat, lon) or (x, y) per grid node, row-major.
std::vector<std::pair<double, double>> grid_coordinates(const GridSpec& grid);

/// Planar extent covered by the grid's node coordinates.
Extent grid_extent(const GridSpec& grid);

/// G2M: grid node -> every mesh node within `radius` (inclusive). Edges are
/// (grid id, mesh id). Throws if a grid node receives no mesh node.
EdgeList connect_grid_to_mesh(const std::vector<Vec3>& grid, const MeshLevel& mesh, double radius);

/// M2G on the sphere: the three corners of the finest icosphere triangle that
/// contains each grid node. `ico_levels` must come from build_icosphere_levels.
/// Edges are (mesh id, grid id).
EdgeList connect_mesh_to_grid_containing(const std::vector<MeshLevel>& ico_levels,
                                         const std::vector<Vec3>& grid);

/// M2G in the plane: the k closest mesh nodes of each grid node, ties going to
/// the smaller mesh id. Edges are (mesh id, grid id).
EdgeList connect_mesh_to_grid_nearest(const MeshLevel& mesh, const std::vector<Vec3>& grid,
                                      std::size_t k);

}  // namespace gefm::mesh
