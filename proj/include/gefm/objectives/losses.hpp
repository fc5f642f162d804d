#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gefm/models/model.hpp"
#include "gefm/models/rollout.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::objectives {

struct LossWeights {
  std::vector<double> area;      // w_a, one per grid node
  std::vector<double> var_inv;   // lambda_j, one per variable
  std::vector<double> level;     // omega_j, one per variable
  double lambda_kl = 1.0;
  double lambda_crps = 0.0;

  /// Unit area, variable and level weights.
  static LossWeights uniform(std::size_t nodes, std::size_t vars);
  /// Per-(node, variable) product w_a * omega_j * lambda_j.
  num::Tensor mse_weight_matrix() const;
  /// Standard deviations that make the NLL equal to the weighted MSE plus a
  /// constant: sigma_j^2 = 1 / (2 omega_j lambda_j), broadcast over nodes.
  num::Tensor equivalent_sigma() const;
  void validate(std::size_t nodes, std::size_t vars) const;
};

/// Inverse variance of one-step differences per variable, pooled over every
/// trajectory, time step and node. Constant variables get `max_value`.
std::vector<double> inverse_difference_variance(const std::vector<std::vector<num::Tensor>>& trajectories,
                                                double max_value = 1e6);

/// (1 / (T N)) sum_{t,a,j} w_a omega_j lambda_j (pred - target)^2.
num::Tensor weighted_mse(std::span<const num::Tensor> preds, std::span<const num::Tensor> targets,
                         const LossWeights& weights);

/// sum_{a,j} w_a (0.5 log 2 pi + log sigma + (x - mu)^2 / (2 sigma^2)) for one step.
num::Tensor gaussian_nll_sum(const num::Tensor& pred, const num::Tensor& sigma, const num::Tensor& target,
                             std::span<const double> area);

/// gaussian_nll_sum averaged over T steps and N nodes. Requires sigma > 0.
num::Tensor nll_loss(std::span<const num::Tensor> preds, std::span<const num::Tensor> sigmas,
                     std::span<const num::Tensor> targets, std::span<const double> area);

/// sum_t sum_{a,j} w_a 0.5 (|a - y| + |b - y| - |a - b|).
num::Tensor crps_train_loss(std::span<const num::Tensor> member_a, std::span<const num::Tensor> member_b,
                            std::span<const num::Tensor> targets, std::span<const double> area);

/// Consecutive states for an unrolled loss: X^{-1}, X^0, targets X^1..X^T
/// and windowed forcing F^1..F^T.
struct Window {
  num::Tensor x_prev2, x_prev1;
  std::vector<num::Tensor> targets;
  std::vector<num::Tensor> forcing;
};

/// Which random streams a loss evaluation draws from.
struct NoiseKey {
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;  // distinguishes batch items / iterations
};

struct ElboStep {
  num::Tensor loss;        // lambda_kl * KL + likelihood
  num::Tensor kl;
  num::Tensor likelihood;  // summed Gaussian negative log-likelihood
  num::Tensor prediction;  // predictor mean under the sampled Z
};

/// One-step negative ELBO with a single reparametrized Z ~ q. Uses the
/// model's sigma head when present, otherwise the equivalent fixed sigma.
ElboStep elbo_step_loss(const models::Model& model, const num::ParamStore& params, const models::StepInput& in,
                        const num::Tensor& target, const LossWeights& weights, num::RngStream& rng);

/// Sum over T steps of elbo_step_loss, feeding back the sampled predictions.
/// Step t draws from (seed, variational, sample, t).
num::Tensor multi_step_loss(const models::Model& model, const num::ParamStore& params, const Window& window,
                            std::size_t steps, const LossWeights& weights, const NoiseKey& key,
                            const models::StepHook& post_step = {});

/// Differentiable rollout driven by Z drawn from the latent map; member m
/// draws from (seed, crps_member, 2 * sample + m, t).
std::vector<num::Tensor> latent_rollout(const models::Model& model, const num::ParamStore& params,
                                        const Window& window, std::size_t steps, const NoiseKey& key,
                                        std::uint64_t member, const models::StepHook& post_step = {});

struct CombinedLoss {
  num::Tensor total;
  num::Tensor elbo;
  num::Tensor crps;  // undefined when lambda_crps == 0
};

/// multi_step_loss + lambda_crps * crps_train_loss over two latent-map rollouts.
CombinedLoss combined_loss(const models::Model& model, const num::ParamStore& params, const Window& window,
                           std::size_t steps, const LossWeights& weights, const NoiseKey& key,
                           const models::StepHook& post_step = {});

enum class DeterministicObjective { mse, nll };

/// Unrolled loss for GraphCast* / Graph-FM: weighted MSE or, with a sigma
/// head, the Gaussian NLL.
num::Tensor deterministic_loss(const models::Model& model, const num::ParamStore& params, const Window& window,
                               std::size_t steps, const LossWeights& weights, DeterministicObjective objective,
                               const models::StepHook& post_step = {});

}  // namespace gefm::objectives
