#include "gefm/models/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "gefm/numcore/ops.hpp"

namespace gefm::models {

using num::Tensor;

namespace {

void check_input(const Model& model, const RolloutInput& input, std::size_t steps) {
  if (steps > input.forcing.size()) {
    throw std::invalid_argument("rollout: " + std::to_string(steps) + " steps requested but only " +
                                std::to_string(input.forcing.size()) + " forcing entries given");
  }
  const num::Shape state{model.graph().grid_size(), model.config().state_dim};
  if (input.x_init_prev.shape() != state || input.x_init.shape() != state) {
    throw num::ShapeError("rollout: initial states must have shape " + num::shape_str(state));
  }
}

void check_finite(const Tensor& x, std::size_t step) {
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw num::NumericalError("rollout: non-finite state at step " + std::to_string(step + 1));
  }
}

template <class StepFn>
Trajectory unroll(const RolloutInput& input, std::size_t steps, StepFn&& next) {
  num::NoGradGuard no_grad;
  Trajectory out;
  out.reserve(steps);
  Tensor prev2 = input.x_init_prev, prev1 = input.x_init;
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor x;
    try {
      x = next(t, StepInput{prev2, prev1, input.forcing[t]});
    } catch (const num::NumericalError& e) {
      throw num::NumericalError("rollout step " + std::to_string(t + 1) + ": " + e.what());
    }
    if (input.post_step) x = input.post_step(t, x);
    check_finite(x, t);
    out.push_back(x);
    prev2 = prev1;
    prev1 = x;
  }
  return out;
}

// Runs job(i) for i in [0, n) on a small pool; the first exception wins.
template <class Job>
void parallel_for(std::size_t n, std::size_t threads, Job&& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

Trajectory rollout_deterministic(const Model& model, const num::ParamStore& params, const RolloutInput& input,
                                 std::size_t steps) {
  if (is_probabilistic(model.config().variant)) {
    throw std::invalid_argument("rollout_deterministic: variant is probabilistic; use sample_member");
  }
  check_input(model, input, steps);
  return unroll(input, steps,
                [&](std::size_t, const StepInput& in) { return step_deterministic(model, params, in).mean; });
}

Trajectory sample_member(const Model& model, const num::ParamStore& params, const RolloutInput& input,
                         std::size_t steps, std::uint64_t seed, std::uint64_t member, const SampleOptions& options) {
  if (!is_probabilistic(model.config().variant)) {
    throw std::invalid_argument("sample_member: variant is deterministic; use rollout_deterministic");
  }
  check_input(model, input, steps);
  return unroll(input, steps, [&](std::size_t t, const StepInput& in) {
    auto prior = latent_map_mean(model, params, in);
    prior.std = num::scale(prior.std, options.latent_std_scale);
    num::RngStream rng({seed, num::Purpose::latent, member, t});
    const auto z = num::reparam_sample(prior, rng);
    return predictor(model, params, z, in).mean;
  });
}

Ensemble sample_ensemble(const Model& model, const num::ParamStore& params, const RolloutInput& input,
                         std::size_t steps, std::size_t members, std::uint64_t seed, std::size_t threads) {
  if (members == 0) throw std::invalid_argument("sample_ensemble: K must be at least 1");
  Ensemble ens;
  ens.seed = seed;
  ens.members.resize(members);
  for (std::size_t k = 0; k < members; ++k) ens.member_ids.push_back(k);
  parallel_for(members, threads, [&](std::size_t k) {
    ens.members[k] = sample_member(model, params, input, steps, seed, ens.member_ids[k]);
  });
  return ens;
}

Ensemble snapshot_ensemble(const Model& model, const std::vector<num::ParamStore>& snapshots,
                           const RolloutInput& input, std::size_t steps, std::size_t threads) {
  if (snapshots.empty()) throw std::invalid_argument("snapshot_ensemble: no snapshots");
  Ensemble ens;
  ens.members.resize(snapshots.size());
  for (std::size_t k = 0; k < snapshots.size(); ++k) ens.member_ids.push_back(k);
  parallel_for(snapshots.size(), threads, [&](std::size_t k) {
    ens.members[k] = rollout_deterministic(model, snapshots[k], input, steps);
  });
  return ens;
}

}  // namespace gefm::models
