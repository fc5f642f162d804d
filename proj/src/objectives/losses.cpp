#include "gefm/objectives/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gefm/numcore/gaussian.hpp"
#include "gefm/numcore/ops.hpp"

namespace gefm::objectives {

using num::Tensor;

LossWeights LossWeights::uniform(std::size_t nodes, std::size_t vars) {
  LossWeights w;
  w.area.assign(nodes, 1.0);
  w.var_inv.assign(vars, 1.0);
  w.level.assign(vars, 1.0);
  return w;
}

void LossWeights::validate(std::size_t nodes, std::size_t vars) const {
  if (area.size() != nodes) {
    throw num::ShapeError("loss weights: " + std::to_string(area.size()) + " area weights for " +
                          std::to_string(nodes) + " grid nodes");
  }
  if (var_inv.size() != vars || level.size() != vars) {
    throw num::ShapeError("loss weights: per-variable weights do not match " + std::to_string(vars) + " variables");
  }
  for (double v : area)
    if (!(v >= 0)) throw std::invalid_argument("loss weights: negative area weight");
  for (std::size_t j = 0; j < vars; ++j) {
    if (!(var_inv[j] > 0) || !(level[j] > 0)) throw std::invalid_argument("loss weights: non-positive variable weight");
  }
  if (!(lambda_kl >= 0) || !(lambda_crps >= 0)) throw std::invalid_argument("loss weights: negative lambda");
}

Tensor LossWeights::mse_weight_matrix() const {
  const auto n = area.size(), d = var_inv.size();
  std::vector<double> m(n * d);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t j = 0; j < d; ++j) m[a * d + j] = area[a] * level[j] * var_inv[j];
  return Tensor::from({n, d}, std::move(m));
}

Tensor LossWeights::equivalent_sigma() const {
  const auto n = area.size(), d = var_inv.size();
  std::vector<double> s(n * d);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t j = 0; j < d; ++j) s[a * d + j] = std::sqrt(1.0 / (2.0 * level[j] * var_inv[j]));
  return Tensor::from({n, d}, std::move(s));
}

std::vector<double> inverse_difference_variance(const std::vector<std::vector<Tensor>>& trajectories,
                                                double max_value) {
  std::size_t d = 0;
  for (const auto& traj : trajectories)
    if (!traj.empty()) d = traj.front().cols();
  if (d == 0) throw std::invalid_argument("inverse_difference_variance: no data");
  std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
  std::size_t count = 0;
  for (const auto& traj : trajectories) {
    for (std::size_t t = 1; t < traj.size(); ++t) {
      const auto a = traj[t - 1].data(), b = traj[t].data();
      if (a.size() != b.size() || traj[t].cols() != d) {
        throw num::ShapeError("inverse_difference_variance: inconsistent state shapes");
      }
      for (std::size_t i = 0; i < b.size(); ++i) {
        const double diff = b[i] - a[i];
        sum[i % d] += diff;
        sum_sq[i % d] += diff * diff;
      }
      count += b.size() / d;
    }
  }
  if (count < 2) throw std::invalid_argument("inverse_difference_variance: need at least two time steps");
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double mean = sum[j] / static_cast<double>(count);
    const double var = sum_sq[j] / static_cast<double>(count) - mean * mean;
    out[j] = var > 1.0 / max_value ? 1.0 / var : max_value;
  }
  return out;
}

namespace {

void check_same(std::span<const Tensor> a, std::span<const Tensor> b, const char* op) {
  if (a.size() != b.size()) throw num::ShapeError(std::string(op) + ": step counts differ");
  if (a.empty()) throw std::invalid_argument(std::string(op) + ": no steps");
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].shape() != b[t].shape()) {
      throw num::ShapeError(std::string(op) + ": shapes " + num::shape_str(a[t].shape()) + " and " +
                            num::shape_str(b[t].shape()) + " differ at step " + std::to_string(t + 1));
    }
  }
}

Tensor column(std::span<const double> area) {
  return Tensor::from({area.size(), 1}, std::vector<double>(area.begin(), area.end()));
}

// Broadcasts per-node weights across variables.
Tensor node_weights(std::span<const double> area, std::size_t rows, std::size_t cols) {
  if (area.size() != rows) {
    throw num::ShapeError("area weights: " + std::to_string(area.size()) + " weights for " + std::to_string(rows) +
                          " grid nodes");
  }
  return num::matmul(column(area), Tensor::full({1, cols}, 1.0));
}

}  // namespace

Tensor weighted_mse(std::span<const Tensor> preds, std::span<const Tensor> targets, const LossWeights& weights) {
  check_same(preds, targets, "weighted_mse");
  weights.validate(preds[0].rows(), preds[0].cols());
  const auto w = weights.mse_weight_matrix();
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < preds.size(); ++t) {
    total = num::add(total, num::sum(num::mul(w, num::square(num::sub(preds[t], targets[t])))));
  }
  return num::scale(total, 1.0 / static_cast<double>(preds.size() * preds[0].rows()));
}

Tensor gaussian_nll_sum(const Tensor& pred, const Tensor& sigma, const Tensor& target, std::span<const double> area) {
  if (pred.shape() != target.shape() || sigma.shape() != pred.shape()) {
    throw num::ShapeError("gaussian_nll: prediction, sigma and target shapes differ");
  }
  for (double s : sigma.data()) {
    if (!(s > 0)) throw num::NumericalError("gaussian_nll: non-positive standard deviation");
  }
  const auto w = node_weights(area, pred.rows(), pred.cols());
  const auto z = num::mul(num::sub(target, pred), num::exp(num::scale(num::log(sigma), -1.0)));
  const auto per = num::add_scalar(num::add(num::log(sigma), num::scale(num::square(z), 0.5)),
                                   0.5 * std::log(2.0 * std::numbers::pi));
  return num::sum(num::mul(w, per));
}

Tensor nll_loss(std::span<const Tensor> preds, std::span<const Tensor> sigmas, std::span<const Tensor> targets,
                std::span<const double> area) {
  check_same(preds, targets, "nll_loss");
  check_same(preds, sigmas, "nll_loss");
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < preds.size(); ++t) {
    total = num::add(total, gaussian_nll_sum(preds[t], sigmas[t], targets[t], area));
  }
  return num::scale(total, 1.0 / static_cast<double>(preds.size() * preds[0].rows()));
}

Tensor crps_train_loss(std::span<const Tensor> member_a, std::span<const Tensor> member_b,
                       std::span<const Tensor> targets, std::span<const double> area) {
  check_same(member_a, targets, "crps_train_loss");
  check_same(member_b, targets, "crps_train_loss");
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto& a = member_a[t];
    const auto& b = member_b[t];
    const auto& y = targets[t];
    const auto w = node_weights(area, y.rows(), y.cols());
    const auto inner =
        num::sub(num::add(num::abs(num::sub(a, y)), num::abs(num::sub(b, y))), num::abs(num::sub(a, b)));
    total = num::add(total, num::scale(num::sum(num::mul(w, inner)), 0.5));
  }
  return total;
}

ElboStep elbo_step_loss(const models::Model& model, const num::ParamStore& params, const models::StepInput& in,
                        const Tensor& target, const LossWeights& weights, num::RngStream& rng) {
  weights.validate(model.graph().grid_size(), model.config().state_dim);
  const auto q = models::variational_params(model, params, in, target);
  const auto z = num::reparam_sample(q, rng);
  const auto pred = models::predictor(model, params, z, in);
  const auto sigma = pred.sigma.defined() ? pred.sigma : weights.equivalent_sigma();

  ElboStep out;
  out.likelihood = gaussian_nll_sum(pred.mean, sigma, target, weights.area);
  out.kl = weights.lambda_kl > 0
               ? num::gaussian_kl_to_unit(q, models::latent_map_mean(model, params, in).mean)
               : Tensor::scalar(0.0);
  out.loss = num::add(num::scale(out.kl, weights.lambda_kl), out.likelihood);
  out.prediction = pred.mean;
  if (!std::isfinite(out.loss.item())) throw num::NumericalError("elbo_step_loss: non-finite loss");
  return out;
}

namespace {

void check_window(const Window& w, std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("unrolled loss: T must be at least 1");
  if (w.targets.size() < steps || w.forcing.size() < steps) {
    throw std::invalid_argument("unrolled loss: window holds " + std::to_string(w.targets.size()) +
                                " targets and " + std::to_string(w.forcing.size()) + " forcing entries, T = " +
                                std::to_string(steps));
  }
}

}  // namespace

Tensor multi_step_loss(const models::Model& model, const num::ParamStore& params, const Window& window,
                       std::size_t steps, const LossWeights& weights, const NoiseKey& key,
                       const models::StepHook& post_step) {
  check_window(window, steps);
  Tensor prev2 = window.x_prev2, prev1 = window.x_prev1;
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    num::RngStream rng({key.seed, num::Purpose::variational, key.sample, t});
    auto step = elbo_step_loss(model, params, {prev2, prev1, window.forcing[t]}, window.targets[t], weights, rng);
    total = num::add(total, step.loss);
    auto next = post_step ? post_step(t, step.prediction) : step.prediction;
    prev2 = prev1;
    prev1 = next;
  }
  return total;
}

std::vector<Tensor> latent_rollout(const models::Model& model, const num::ParamStore& params, const Window& window,
                                   std::size_t steps, const NoiseKey& key, std::uint64_t member,
                                   const models::StepHook& post_step) {
  check_window(window, steps);
  std::vector<Tensor> out;
  Tensor prev2 = window.x_prev2, prev1 = window.x_prev1;
  for (std::size_t t = 0; t < steps; ++t) {
    const models::StepInput in{prev2, prev1, window.forcing[t]};
    num::RngStream rng({key.seed, num::Purpose::crps_member, 2 * key.sample + member, t});
    const auto z = num::reparam_sample(models::latent_map_mean(model, params, in), rng);
    auto x = models::predictor(model, params, z, in).mean;
    if (post_step) x = post_step(t, x);
    out.push_back(x);
    prev2 = prev1;
    prev1 = x;
  }
  return out;
}

CombinedLoss combined_loss(const models::Model& model, const num::ParamStore& params, const Window& window,
                           std::size_t steps, const LossWeights& weights, const NoiseKey& key,
                           const models::StepHook& post_step) {
  CombinedLoss out;
  out.elbo = multi_step_loss(model, params, window, steps, weights, key, post_step);
  out.total = out.elbo;
  if (weights.lambda_crps > 0) {
    const auto a = latent_rollout(model, params, window, steps, key, 0, post_step);
    const auto b = latent_rollout(model, params, window, steps, key, 1, post_step);
    out.crps = crps_train_loss(a, b, std::span(window.targets).first(steps), weights.area);
    out.total = num::add(out.total, num::scale(out.crps, weights.lambda_crps));
  }
  return out;
}

Tensor deterministic_loss(const models::Model& model, const num::ParamStore& params, const Window& window,
                          std::size_t steps, const LossWeights& weights, DeterministicObjective objective,
                          const models::StepHook& post_step) {
  check_window(window, steps);
  if (objective == DeterministicObjective::nll && !model.config().output_sigma) {
    throw std::invalid_argument("deterministic_loss: the NLL objective needs a model with a sigma head");
  }
  std::vector<Tensor> preds, sigmas;
  Tensor prev2 = window.x_prev2, prev1 = window.x_prev1;
  for (std::size_t t = 0; t < steps; ++t) {
    auto pred = models::step_deterministic(model, params, {prev2, prev1, window.forcing[t]});
    auto x = post_step ? post_step(t, pred.mean) : pred.mean;
    preds.push_back(x);
    sigmas.push_back(pred.sigma);
    prev2 = prev1;
    prev1 = x;
  }
  const auto targets = std::span(window.targets).first(steps);
  if (objective == DeterministicObjective::mse) return weighted_mse(preds, targets, weights);
  return nll_loss(preds, sigmas, targets, weights.area);
}

}  // namespace gefm::objectives
