#pragma once

#include <cstdint>
#include <string>

#include "gefm/models/model.hpp"
#include "gefm/numcore/params.hpp"

namespace gefm::models {

struct Checkpoint {
  ModelConfig config;
  num::ParamStore params;
  std::uint64_t graph_hash = 0;
  std::string metadata = "{}";  // free-form JSON object (normalization stats, run info)
};

/// Layout: 8-byte magic "GEFMCKPT", u32 format version, u64 header length,
/// JSON header (config, graph hash, tensor directory, metadata), then every
/// tensor as little-endian float64 in directory order. Writes atomically.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace gefm::models
