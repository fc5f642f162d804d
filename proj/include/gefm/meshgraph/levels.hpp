#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "gefm/meshgraph/geometry.hpp"

namespace gefm::mesh {

using Face = std::array<std::uint32_t, 3>;

/// One mesh level: node positions plus directed intra-level edges in local ids.
struct MeshLevel {
  std::vector<Vec3> pos;
  EdgeList edges;
  /// Icosphere triangles. Faces 4i..4i+3 of a level are the children of face i
  /// of the next coarser level.
  std::vector<Face> faces;
  /// Lattice extents of a planar level (nodes per row and per column).
  std::size_t nx = 0, ny = 0;

  std::size_t size() const { return pos.size(); }
  /// Largest intra-level edge length.
  double max_edge_length() const;
  /// Largest per-axis separation over intra-level edges (planar node spacing).
  double max_axis_spacing() const;
};

/// Icosahedron refined `refinements` times by splitting every face into four,
/// with new vertices projected to the unit sphere. Returned coarse to fine:
/// element k is the mesh after k splits and its first nodes are exactly the
/// nodes of element k-1.
std::vector<MeshLevel> build_icosphere_levels(std::size_t refinements);

/// Axis-aligned rectangle that planar meshes are laid over.
struct Extent {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
};

/// Regular quadrilateral lattices with 8-neighbour connectivity. The finest
/// level has nx by ny nodes at the cell centres of an nx by ny partition of
/// `extent`; each coarser level triples the spacing, so its nodes coincide
/// with the centres of 3x3 blocks of the level below. Returned coarse to fine.
std::vector<MeshLevel> build_lam_levels(std::size_t nx, std::size_t ny, std::size_t num_levels,
                                        const Extent& extent);

/// For every node of `coarse`, the index of the coincident node of `fine`.
/// Throws std::invalid_argument when some coarse node has no partner.
std::vector<std::uint32_t> nesting_map(const MeshLevel& coarse, const MeshLevel& fine);

/// Union of all levels' edges on the finest node set (levels given coarse to
/// fine), with coincident nodes identified and duplicates removed.
MeshLevel merge_multiscale(const std::vector<MeshLevel>& levels);

/// Up edges fine -> coarse: each fine node links to every coarse node within
/// `factor` times the fine level's edge length. Throws if a fine node gets none.
EdgeList connect_up_radius(const MeshLevel& fine, const MeshLevel& coarse, double factor);

/// Up edges fine -> coarse: each fine node links to its single closest coarse
/// node, ties going to the smaller coarse id.
EdgeList connect_up_nearest(const MeshLevel& fine, const MeshLevel& coarse);

}  // namespace gefm::mesh
