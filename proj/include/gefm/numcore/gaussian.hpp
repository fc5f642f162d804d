#pragma once

#include "gefm/numcore/rng.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::num {

/// Diagonal Gaussian with elementwise mean and standard deviation.
struct DiagGaussian {
  Tensor mean;
  Tensor std;
};

/// KL(q || N(prior_mean, I)) summed over all elements:
///   sum 0.5 * (s^2 + (m - m_p)^2 - 1 - 2 log s)
Tensor gaussian_kl_to_unit(const DiagGaussian& q, const Tensor& prior_mean);

/// z = mean + std * eps with eps ~ N(0, I) drawn from `rng`; differentiable in
/// mean and std. A zero std is accepted here (degenerate sampling).
Tensor reparam_sample(const DiagGaussian& q, RngStream& rng);

}  // namespace gefm::num
