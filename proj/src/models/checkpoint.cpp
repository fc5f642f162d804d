#include "gefm/models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <vector>

namespace gefm::models {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'F', 'M', 'C', 'K', 'P', 'T'};

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("checkpoint: truncated file");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return value;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json dir = nlohmann::json::array();
  std::string data;
  for (const auto& [name, tensor] : ckpt.params) {
    dir.push_back({{"name", name}, {"shape", tensor.shape()}});
    for (double v : tensor.data()) put_le(data, std::bit_cast<std::uint64_t>(v));
  }
  const nlohmann::json header = {{"config", nlohmann::json::parse(config_to_json(ckpt.config))},
                                 {"graph_hash", ckpt.graph_hash},
                                 {"tensors", dir},
                                 {"metadata", nlohmann::json::parse(ckpt.metadata)}};
  const auto header_text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint64_t>(header_text.size()));
  out += header_text;
  out += data;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(in, pos);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(in, pos);
  if (pos + header_len > in.size()) throw std::runtime_error("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(in.substr(pos, header_len));
  pos += header_len;

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config").dump());
  ckpt.graph_hash = header.at("graph_hash").get<std::uint64_t>();
  ckpt.metadata = header.at("metadata").dump();
  for (const auto& entry : header.at("tensors")) {
    const auto shape = entry.at("shape").get<num::Shape>();
    std::vector<double> values(num::shape_numel(shape));
    for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, pos));
    ckpt.params.set(entry.at("name").get<std::string>(), num::Tensor::from(shape, std::move(values)));
  }
  if (pos != in.size()) throw std::runtime_error("checkpoint: trailing bytes after tensor data");
  return ckpt;
}

}  // namespace gefm::models
