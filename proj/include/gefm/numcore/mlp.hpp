#pragma once

#include <cstddef>
#include <string>

#include "gefm/numcore/params.hpp"
#include "gefm/numcore/rng.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::num {

inline constexpr double kLayerNormEps = 1e-5;

/// One-hidden-layer MLP with Swish activation, optionally followed by a
/// LayerNorm with learned gain and bias.
struct MlpParams {
  Tensor w_in, b_in, w_out, b_out;
  bool apply_output_norm = false;
  Tensor norm_gain, norm_bias;

  std::size_t in_width() const { return w_in.shape()[0]; }
  std::size_t hidden_width() const { return w_in.shape()[1]; }
  std::size_t out_width() const { return w_out.shape()[1]; }
};

Tensor mlp_forward(const MlpParams& params, const Tensor& x);

struct MlpShape {
  std::size_t in = 0;
  std::size_t hidden = 0;
  std::size_t out = 0;
  bool output_norm = false;
};

/// How an MLP is initialized. Hidden weights are LeCun-normal unless
/// `all_zero`; `zero_output` zeroes the output layer; `norm_gain` seeds the
/// LayerNorm gain (0 makes the block output exactly zero).
struct MlpInit {
  bool all_zero = false;
  bool zero_output = false;
  double norm_gain = 1.0;
  double bias_scale = 0.0;
};

/// Adds `<prefix>.w_in`, `.b_in`, `.w_out`, `.b_out` (and `.ln_gain`,
/// `.ln_bias` when normalized) to the store.
void init_mlp(ParamStore& store, const std::string& prefix, const MlpShape& shape,
              const MlpInit& init, RngStream& rng);

/// Reassembles the block stored under `prefix`.
MlpParams mlp_view(const ParamStore& store, const std::string& prefix);

}  // namespace gefm::num
