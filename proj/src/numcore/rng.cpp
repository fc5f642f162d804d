#include "gefm/numcore/rng.hpp"

#include <cmath>
#include <numbers>

namespace gefm::num {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(const StreamKey& key) {
  std::uint64_t h = mix64(key.seed);
  h = mix64(h ^ static_cast<std::uint64_t>(key.purpose));
  h = mix64(h ^ key.member);
  h = mix64(h ^ key.step);
  key_ = h;
}

std::uint64_t RngStream::next_u64() { return mix64(key_ ^ mix64(counter_++)); }

double RngStream::uniform() {
  // 53 random bits, shifted off zero
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void RngStream::fill_normal(std::span<double> out) {
  for (auto& v : out) v = normal();
}

std::uint64_t RngStream::below(std::uint64_t n) {
  // rejection keeps the draw unbiased
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

}  // namespace gefm::num
