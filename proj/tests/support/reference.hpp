#pragma once

// Plain-loop reference implementations used as test oracles. They share no
// code with the library's tensor ops.

#include <cmath>
#include <cstdint>
#include <vector>

#include "gefm/numcore/mlp.hpp"
#include "gefm/numcore/rng.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::testing {

using Matrix = std::vector<std::vector<double>>;

inline num::Tensor random_tensor(num::Shape shape, std::uint64_t seed, double scale = 1.0, bool grad = false) {
  num::RngStream rng({seed, num::Purpose::test, 0, 0});
  std::vector<double> d(num::shape_numel(shape));
  for (auto& v : d) v = scale * rng.normal();
  return num::Tensor::from(std::move(shape), std::move(d), grad);
}

inline Matrix to_matrix(const num::Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

/// One-row MLP evaluation with explicit loops.
inline std::vector<double> mlp_row(const num::MlpParams& p, const std::vector<double>& x) {
  const auto in = p.in_width(), hid = p.hidden_width(), out = p.out_width();
  std::vector<double> h(hid), y(out);
  for (std::size_t j = 0; j < hid; ++j) {
    double a = p.b_in[j];
    for (std::size_t i = 0; i < in; ++i) a += x[i] * p.w_in[i * hid + j];
    h[j] = a / (1.0 + std::exp(-a));
  }
  for (std::size_t k = 0; k < out; ++k) {
    double a = p.b_out[k];
    for (std::size_t j = 0; j < hid; ++j) a += h[j] * p.w_out[j * out + k];
    y[k] = a;
  }
  if (p.apply_output_norm) {
    double mean = 0.0, var = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(out);
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(out);
    for (std::size_t k = 0; k < out; ++k)
      y[k] = p.norm_gain[k] * (y[k] - mean) / std::sqrt(var + num::kLayerNormEps) + p.norm_bias[k];
  }
  return y;
}

inline std::vector<double> join(std::initializer_list<std::vector<double>> parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline double max_abs_diff(const num::Tensor& t, const Matrix& m) {
  double worst = 0.0;
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c) worst = std::max(worst, std::fabs(t.at(r, c) - m[r][c]));
  return worst;
}

}  // namespace gefm::testing
