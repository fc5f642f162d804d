#include "gefm/numcore/gaussian.hpp"

#include "gefm/numcore/ops.hpp"

namespace gefm::num {

Tensor gaussian_kl_to_unit(const DiagGaussian& q, const Tensor& prior_mean) {
  if (q.mean.shape() != q.std.shape() || q.mean.shape() != prior_mean.shape()) {
    throw ShapeError("gaussian_kl_to_unit: mean/std/prior shapes disagree");
  }
  for (double s : q.std.data()) {
    if (!(s > 0)) throw NumericalError("gaussian_kl_to_unit: non-positive standard deviation");
  }
  auto terms = add(square(q.std), square(sub(q.mean, prior_mean)));
  terms = sub(add_scalar(terms, -1.0), scale(log(q.std), 2.0));
  return scale(sum(terms), 0.5);
}

Tensor reparam_sample(const DiagGaussian& q, RngStream& rng) {
  if (q.mean.shape() != q.std.shape()) throw ShapeError("reparam_sample: mean/std shapes disagree");
  for (double s : q.std.data()) {
    if (s < 0) throw NumericalError("reparam_sample: negative standard deviation");
  }
  std::vector<double> eps(q.mean.numel());
  rng.fill_normal(eps);
  auto noise = Tensor::from(q.mean.shape(), std::move(eps));
  return add(q.mean, mul(q.std, noise));
}

}  // namespace gefm::num
