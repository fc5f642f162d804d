#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gefm::objectives {

enum class StageMode { autoencoder, variational, crps_finetune, mse, nll };

const char* stage_mode_name(StageMode mode);
StageMode parse_stage_mode(const std::string& name);

struct StageConfig {
  StageMode mode = StageMode::mse;
  std::size_t epochs = 1;
  double learning_rate = 1e-3;
  std::size_t unroll = 1;
  double lambda_kl = 1.0;
  double lambda_crps = 0.0;
};

/// Throws std::invalid_argument naming the stage on a bad field.
void validate_stage(const StageConfig& stage, std::size_t index);

/// Default toy schedules. Graph-EFM: autoencoder, variational, then CRPS
/// fine-tuning with longer rollouts. Deterministic: one-step training, then
/// rollout fine-tuning.
std::vector<StageConfig> default_graph_efm_schedule(bool lam);
std::vector<StageConfig> default_deterministic_schedule(bool with_sigma);

}  // namespace gefm::objectives
