#include "gefm/pipeline/io.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gefm::pipeline {

namespace fs = std::filesystem;

void atomic_write(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::invalid_argument("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_f64_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double read_f64_le(const std::string& bytes, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i)]);
  return std::bit_cast<double>(bits);
}

nlohmann::json grid_to_json(const mesh::GridSpec& g) {
  return {{"geometry", g.geometry == mesh::Geometry::spherical ? "spherical" : "planar"},
          {"rows", g.rows},
          {"cols", g.cols},
          {"lat0", g.lat0},
          {"dlat", g.dlat},
          {"lon0", g.lon0},
          {"dlon", g.dlon}};
}

mesh::GridSpec grid_from_json(const nlohmann::json& j) {
  mesh::GridSpec g;
  const auto geometry = j.at("geometry").get<std::string>();
  if (geometry == "spherical") {
    g.geometry = mesh::Geometry::spherical;
  } else if (geometry == "planar") {
    g.geometry = mesh::Geometry::planar;
  } else {
    throw std::invalid_argument("unknown grid geometry '" + geometry + "'");
  }
  g.rows = j.at("rows").get<std::size_t>();
  g.cols = j.at("cols").get<std::size_t>();
  g.lat0 = j.at("lat0").get<double>();
  g.dlat = j.at("dlat").get<double>();
  g.lon0 = j.at("lon0").get<double>();
  g.dlon = j.at("dlon").get<double>();
  return g;
}

std::string hex_digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gefm::pipeline
