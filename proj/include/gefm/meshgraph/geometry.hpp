#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace gefm::mesh {

/// A point in 3-D. Planar geometry uses z = 0 so that one distance function
/// serves both geometries (chordal on the unit sphere, Euclidean in the plane).
struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double distance(Vec3 a, Vec3 b) { return norm(a - b); }
inline Vec3 normalized(Vec3 a) { return (1.0 / norm(a)) * a; }

/// Directed edge (sender, receiver) in level-local node indices.
using Edge = std::pair<std::uint32_t, std::uint32_t>;
using EdgeList = std::vector<Edge>;

enum class Geometry { spherical, planar };
enum class Kind { multiscale, hierarchical };

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Longitude folded into [-180, 180).
inline double wrap_lon(double lon) {
  double w = std::fmod(lon + 180.0, 360.0);
  if (w < 0) w += 360.0;
  return w - 180.0;
}

inline Vec3 latlon_to_xyz(double lat_deg, double lon_deg) {
  const double la = deg2rad(lat_deg), lo = deg2rad(lon_deg);
  return {std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la)};
}

/// (lat, lon) in degrees of a unit vector, lon in [-180, 180).
inline std::pair<double, double> xyz_to_latlon(Vec3 p) {
  const double lat = rad2deg(std::asin(std::clamp(p.z / norm(p), -1.0, 1.0)));
  const double lon = wrap_lon(rad2deg(std::atan2(p.y, p.x)));
  return {lat, lon};
}

/// Swaps sender and receiver of every edge and re-sorts.
EdgeList reversed(const EdgeList& edges);

/// Lexicographic (sender, receiver) order with duplicates removed.
void canonicalize(EdgeList& edges);

/// Uniform bucket index over a point cloud for radius and k-nearest queries.
class PointIndex {
 public:
  PointIndex(const std::vector<Vec3>& points, double cell);

  /// Ids of all points with distance <= radius, ascending.
  std::vector<std::uint32_t> within(Vec3 q, double radius) const;
  /// The k closest ids, ordered by (distance, id).
  std::vector<std::uint32_t> nearest(Vec3 q, std::size_t k) const;

 private:
  struct Key {
    std::int64_t i, j, k;
    bool operator<(const Key& o) const {
      return i != o.i ? i < o.i : (j != o.j ? j < o.j : k < o.k);
    }
  };
  Key key_of(Vec3 p) const;

  const std::vector<Vec3>& points_;
  double cell_;
  std::vector<std::pair<Key, std::uint32_t>> sorted_;
};

}  // namespace gefm::mesh
