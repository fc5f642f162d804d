#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gefm/meshgraph/grid.hpp"

namespace gefm::pipeline {

/// Writes to `path + ".tmp"` and renames over `path`. Creates parent
/// directories.
void atomic_write(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

void write_f64_le(std::string& out, double v);
double read_f64_le(const std::string& bytes, std::size_t offset);

nlohmann::json grid_to_json(const mesh::GridSpec& grid);
mesh::GridSpec grid_from_json(const nlohmann::json& j);

/// Stable 64-bit FNV-1a digest of a byte string, printed as 16 hex digits.
std::string hex_digest(const std::string& bytes);

}  // namespace gefm::pipeline
