#include "gefm/numcore/mlp.hpp"

#include <cmath>

#include "gefm/numcore/ops.hpp"

namespace gefm::num {

Tensor mlp_forward(const MlpParams& params, const Tensor& x) {
  if (x.cols() != params.in_width()) {
    throw ShapeError("mlp_forward: input width " + std::to_string(x.cols()) + ", expected " +
                     std::to_string(params.in_width()));
  }
  auto hidden = swish(linear(x, params.w_in, params.b_in));
  auto out = linear(hidden, params.w_out, params.b_out);
  if (params.apply_output_norm) out = layer_norm(out, params.norm_gain, params.norm_bias, kLayerNormEps);
  return out;
}

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, double stddev, RngStream& rng) {
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = stddev * rng.normal();
  return Tensor::from({rows, cols}, std::move(data), true);
}

Tensor random_vector(std::size_t n, double stddev, RngStream& rng) {
  std::vector<double> data(n, 0.0);
  if (stddev > 0)
    for (auto& v : data) v = stddev * rng.normal();
  return Tensor::from({n}, std::move(data), true);
}

}  // namespace

void init_mlp(ParamStore& store, const std::string& prefix, const MlpShape& shape,
              const MlpInit& init, RngStream& rng) {
  const double in_scale = init.all_zero ? 0.0 : 1.0 / std::sqrt(static_cast<double>(shape.in));
  const double out_scale =
      (init.all_zero || init.zero_output) ? 0.0 : 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  const double bias_scale = init.all_zero ? 0.0 : init.bias_scale;
  store.set(prefix + ".w_in", random_matrix(shape.in, shape.hidden, in_scale, rng));
  store.set(prefix + ".b_in", random_vector(shape.hidden, bias_scale, rng));
  store.set(prefix + ".w_out", random_matrix(shape.hidden, shape.out, out_scale, rng));
  store.set(prefix + ".b_out",
            random_vector(shape.out, init.zero_output ? 0.0 : bias_scale, rng));
  if (shape.output_norm) {
    const double gain = init.all_zero ? 0.0 : init.norm_gain;
    store.set(prefix + ".ln_gain", Tensor::full({shape.out}, gain));
    store.set(prefix + ".ln_bias", Tensor::zeros({shape.out}));
  }
}

MlpParams mlp_view(const ParamStore& store, const std::string& prefix) {
  MlpParams p;
  p.w_in = store.get(prefix + ".w_in");
  p.b_in = store.get(prefix + ".b_in");
  p.w_out = store.get(prefix + ".w_out");
  p.b_out = store.get(prefix + ".b_out");
  if (store.contains(prefix + ".ln_gain")) {
    p.apply_output_norm = true;
    p.norm_gain = store.get(prefix + ".ln_gain");
    p.norm_bias = store.get(prefix + ".ln_bias");
  }
  return p;
}

}  // namespace gefm::num
