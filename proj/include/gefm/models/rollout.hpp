#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "gefm/models/model.hpp"

namespace gefm::models {

/// Applied to every predicted state before it is fed back; receives the
/// 0-based step index. Used for boundary forcing in limited-area runs.
using StepHook = std::function<num::Tensor(std::size_t step, const num::Tensor& state)>;

struct RolloutInput {
  num::Tensor x_init_prev;  // X^{-1}
  num::Tensor x_init;       // X^0
  std::vector<num::Tensor> forcing;  // windowed F^1..F^T
  StepHook post_step;                // optional
};

using Trajectory = std::vector<num::Tensor>;

/// X^1..X^T from a deterministic variant. Runs without gradient recording.
Trajectory rollout_deterministic(const Model& model, const num::ParamStore& params, const RolloutInput& input,
                                 std::size_t steps);

struct SampleOptions {
  /// Multiplies the latent standard deviation; 0 rolls out through the mean.
  double latent_std_scale = 1.0;
};

/// One ensemble member. Step t draws its latent noise from the stream
/// (seed, latent, member, t), so the member is a pure function of its key.
Trajectory sample_member(const Model& model, const num::ParamStore& params, const RolloutInput& input,
                         std::size_t steps, std::uint64_t seed, std::uint64_t member,
                         const SampleOptions& options = {});

struct Ensemble {
  std::vector<Trajectory> members;
  std::vector<std::uint64_t> member_ids;
  std::uint64_t seed = 0;
};

/// K members computed on up to `threads` worker threads (0 = hardware
/// concurrency). The result does not depend on the thread count.
Ensemble sample_ensemble(const Model& model, const num::ParamStore& params, const RolloutInput& input,
                         std::size_t steps, std::size_t members, std::uint64_t seed, std::size_t threads = 0);

/// Members drawn from a list of parameter snapshots, one deterministic
/// rollout per snapshot.
Ensemble snapshot_ensemble(const Model& model, const std::vector<num::ParamStore>& snapshots,
                           const RolloutInput& input, std::size_t steps, std::size_t threads = 0);

}  // namespace gefm::models
