#include "gefm/meshgraph/levels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace gefm::mesh {

double MeshLevel::max_edge_length() const {
  double best = 0.0;
  for (const auto& [s, r] : edges) best = std::max(best, distance(pos[s], pos[r]));
  return best;
}

double MeshLevel::max_axis_spacing() const {
  double best = 0.0;
  for (const auto& [s, r] : edges) {
    const Vec3 d = pos[r] - pos[s];
    best = std::max({best, std::fabs(d.x), std::fabs(d.y), std::fabs(d.z)});
  }
  return best;
}

namespace {

EdgeList edges_from_faces(const std::vector<Face>& faces) {
  EdgeList edges;
  edges.reserve(faces.size() * 6);
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      const auto a = f[k], b = f[(k + 1) % 3];
      edges.emplace_back(a, b);
      edges.emplace_back(b, a);
    }
  }
  canonicalize(edges);
  return edges;
}

MeshLevel icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double len = std::sqrt(1.0 + phi * phi);
  std::vector<Vec3> v;
  for (double c1 : {1.0, -1.0}) {
    for (double c2 : {phi, -phi}) {
      v.push_back({c1, c2, 0.0});
      v.push_back({0.0, c1, c2});
      v.push_back({c2, 0.0, c1});
    }
  }
  // Rotate about the y axis so that an edge midpoint, rather than a vertex,
  // sits at each pole.
  const double angle = (kPi - 2.0 * std::asin(phi / std::sqrt(3.0))) / 2.0;
  const double c = std::cos(angle), s = std::sin(angle);
  MeshLevel level;
  for (auto p : v) {
    p = (1.0 / len) * p;
    level.pos.push_back({p.x * c - p.z * s, p.y, p.x * s + p.z * c});
  }
  level.faces = {{0, 1, 2},  {0, 6, 1},  {8, 0, 2},  {8, 4, 0},  {3, 8, 2},
                 {3, 2, 7},  {7, 2, 1},  {0, 4, 6},  {4, 11, 6}, {6, 11, 5},
                 {1, 5, 7},  {4, 10, 11}, {4, 8, 10}, {10, 8, 3}, {10, 3, 9},
                 {11, 10, 9}, {11, 9, 5}, {5, 9, 7},  {9, 3, 7},  {1, 6, 5}};
  level.edges = edges_from_faces(level.faces);
  return level;
}

MeshLevel split_faces(const MeshLevel& coarse) {
  MeshLevel fine;
  fine.pos = coarse.pos;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
  auto mid = [&](std::uint32_t a, std::uint32_t b) {
    const auto key = std::minmax(a, b);
    auto it = midpoints.find(key);
    if (it != midpoints.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(fine.pos.size());
    fine.pos.push_back(normalized(fine.pos[a] + fine.pos[b]));
    midpoints.emplace(key, id);
    return id;
  };
  fine.faces.reserve(coarse.faces.size() * 4);
  for (const auto& [a, b, c] : coarse.faces) {
    const auto ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    fine.faces.push_back({a, ab, ca});
    fine.faces.push_back({b, bc, ab});
    fine.faces.push_back({c, ca, bc});
    fine.faces.push_back({ab, bc, ca});
  }
  fine.edges = edges_from_faces(fine.faces);
  return fine;
}

MeshLevel lattice(std::size_t nx, std::size_t ny, const Extent& e) {
  MeshLevel level;
  level.nx = nx;
  level.ny = ny;
  const double dx = (e.xmax - e.xmin) / static_cast<double>(nx);
  const double dy = (e.ymax - e.ymin) / static_cast<double>(ny);
  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      level.pos.push_back({e.xmin + (static_cast<double>(c) + 0.5) * dx,
                           e.ymin + (static_cast<double>(r) + 0.5) * dy, 0.0});
    }
  }
  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const auto rr = static_cast<std::ptrdiff_t>(r) + dr;
          const auto cc = static_cast<std::ptrdiff_t>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(ny) ||
              cc >= static_cast<std::ptrdiff_t>(nx))
            continue;
          level.edges.emplace_back(static_cast<std::uint32_t>(rr * nx + cc),
                                   static_cast<std::uint32_t>(r * nx + c));
        }
      }
    }
  }
  canonicalize(level.edges);
  return level;
}

}  // namespace

std::vector<MeshLevel> build_icosphere_levels(std::size_t refinements) {
  std::vector<MeshLevel> levels{icosahedron()};
  for (std::size_t k = 0; k < refinements; ++k) levels.push_back(split_faces(levels.back()));
  return levels;
}

std::vector<MeshLevel> build_lam_levels(std::size_t nx, std::size_t ny, std::size_t num_levels,
                                        const Extent& extent) {
  if (num_levels == 0) throw std::invalid_argument("build_lam_levels: need at least one level");
  std::size_t factor = 1;
  for (std::size_t l = 1; l < num_levels; ++l) factor *= 3;
  if (nx < factor || ny < factor || nx % factor != 0 || ny % factor != 0) {
    throw std::invalid_argument("build_lam_levels: " + std::to_string(nx) + "x" +
                                std::to_string(ny) + " nodes cannot be tripled " +
                                std::to_string(num_levels - 1) + " times");
  }
  if (!(extent.xmax > extent.xmin) || !(extent.ymax > extent.ymin)) {
    throw std::invalid_argument("build_lam_levels: empty extent");
  }
  std::vector<MeshLevel> levels;
  for (std::size_t f = factor; f >= 1; f /= 3) {
    levels.push_back(lattice(nx / f, ny / f, extent));
    if (f == 1) break;
  }
  return levels;
}

std::vector<std::uint32_t> nesting_map(const MeshLevel& coarse, const MeshLevel& fine) {
  if (coarse.size() == 0) return {};
  if (fine.size() == 0) throw std::invalid_argument("nesting_map: empty fine level");
  const double scale = std::max(fine.max_edge_length(), 1e-12);
  PointIndex index(fine.pos, scale);
  std::vector<std::uint32_t> map;
  map.reserve(coarse.size());
  for (const auto& p : coarse.pos) {
    const auto near = index.within(p, 1e-9 * scale);
    if (near.empty()) throw std::invalid_argument("nesting_map: levels are not nested");
    map.push_back(near.front());
  }
  return map;
}

MeshLevel merge_multiscale(const std::vector<MeshLevel>& levels) {
  if (levels.empty()) throw std::invalid_argument("merge_multiscale: no levels");
  MeshLevel merged = levels.back();
  merged.faces.clear();
  // Compose nesting maps from each level down to the finest.
  std::vector<std::uint32_t> to_finest(levels.back().size());
  for (std::uint32_t i = 0; i < to_finest.size(); ++i) to_finest[i] = i;
  for (std::size_t l = levels.size() - 1; l-- > 0;) {
    const auto step = nesting_map(levels[l], levels[l + 1]);
    std::vector<std::uint32_t> composed(step.size());
    for (std::size_t i = 0; i < step.size(); ++i) composed[i] = to_finest[step[i]];
    to_finest = std::move(composed);
    for (const auto& [s, r] : levels[l].edges) merged.edges.emplace_back(to_finest[s], to_finest[r]);
  }
  canonicalize(merged.edges);
  return merged;
}

EdgeList connect_up_radius(const MeshLevel& fine, const MeshLevel& coarse, double factor) {
  const double radius = factor * fine.max_edge_length();
  PointIndex index(coarse.pos, radius);
  EdgeList edges;
  for (std::uint32_t i = 0; i < fine.size(); ++i) {
    const auto targets = index.within(fine.pos[i], radius);
    if (targets.empty()) {
      throw std::runtime_error("connect_up_radius: node " + std::to_string(i) +
                               " has no coarser node within range");
    }
    for (auto t : targets) edges.emplace_back(i, t);
  }
  canonicalize(edges);
  return edges;
}

EdgeList connect_up_nearest(const MeshLevel& fine, const MeshLevel& coarse) {
  PointIndex index(coarse.pos, std::max(coarse.max_edge_length(), 1e-12));
  EdgeList edges;
  edges.reserve(fine.size());
  for (std::uint32_t i = 0; i < fine.size(); ++i) edges.emplace_back(i, index.nearest(fine.pos[i], 1)[0]);
  canonicalize(edges);
  return edges;
}

}  // namespace gefm::mesh
