#pragma once

#include <cstdint>
#include <span>

namespace gefm::num {

/// What a random stream is used for; part of the stream key so unrelated
/// consumers never share draws.
enum class Purpose : std::uint64_t {
  init = 1,
  latent = 2,
  variational = 3,
  data_noise = 4,
  shuffle = 5,
  crps_member = 6,
  test = 7,
};

struct StreamKey {
  std::uint64_t seed = 0;
  Purpose purpose = Purpose::test;
  std::uint64_t member = 0;
  std::uint64_t step = 0;
};

/// Counter-based generator: draw i of a stream is a pure function of
/// (key, i), so streams are independent of the order they are consumed in.
class RngStream {
 public:
  explicit RngStream(const StreamKey& key);

  std::uint64_t next_u64();
  /// Uniform in (0, 1).
  double uniform();
  double normal();
  void fill_normal(std::span<double> out);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace gefm::num
