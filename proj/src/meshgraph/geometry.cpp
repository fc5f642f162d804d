#include "gefm/meshgraph/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace gefm::mesh {

EdgeList reversed(const EdgeList& edges) {
  EdgeList out;
  out.reserve(edges.size());
  for (const auto& [s, r] : edges) out.emplace_back(r, s);
  canonicalize(out);
  return out;
}

void canonicalize(EdgeList& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

PointIndex::PointIndex(const std::vector<Vec3>& points, double cell) : points_(points), cell_(cell) {
  if (!(cell > 0)) throw std::invalid_argument("PointIndex: cell size must be positive");
  sorted_.reserve(points.size());
  for (std::uint32_t i = 0; i < points.size(); ++i) sorted_.emplace_back(key_of(points[i]), i);
  std::sort(sorted_.begin(), sorted_.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (!(b.first < a.first) && a.second < b.second);
  });
}

PointIndex::Key PointIndex::key_of(Vec3 p) const {
  return {static_cast<std::int64_t>(std::floor(p.x / cell_)),
          static_cast<std::int64_t>(std::floor(p.y / cell_)),
          static_cast<std::int64_t>(std::floor(p.z / cell_))};
}

std::vector<std::uint32_t> PointIndex::within(Vec3 q, double radius) const {
  std::vector<std::uint32_t> out;
  const Key lo = key_of(q - Vec3{radius, radius, radius});
  const Key hi = key_of(q + Vec3{radius, radius, radius});
  const double buckets = (static_cast<double>(hi.i - lo.i) + 1.0) * (static_cast<double>(hi.j - lo.j) + 1.0);
  if (buckets > static_cast<double>(sorted_.size())) {
    for (std::uint32_t i = 0; i < points_.size(); ++i)
      if (distance(points_[i], q) <= radius) out.push_back(i);
    return out;
  }
  for (auto i = lo.i; i <= hi.i; ++i) {
    for (auto j = lo.j; j <= hi.j; ++j) {
      // buckets with equal (i, j) are contiguous and ordered by k
      auto first = std::lower_bound(sorted_.begin(), sorted_.end(), Key{i, j, lo.k},
                                    [](const auto& e, const Key& k) { return e.first < k; });
      for (auto it = first; it != sorted_.end() && it->first.i == i && it->first.j == j &&
                            it->first.k <= hi.k;
           ++it) {
        if (distance(points_[it->second], q) <= radius) out.push_back(it->second);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> PointIndex::nearest(Vec3 q, std::size_t k) const {
  if (k > points_.size()) throw std::invalid_argument("PointIndex: fewer points than requested");
  double radius = cell_;
  std::vector<std::uint32_t> found;
  while ((found = within(q, radius)).size() < k) radius *= 2.0;
  std::vector<std::pair<double, std::uint32_t>> ranked;
  ranked.reserve(found.size());
  for (auto id : found) ranked.emplace_back(distance(points_[id], q), id);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(ranked[i].second);
  return out;
}

}  // namespace gefm::mesh
