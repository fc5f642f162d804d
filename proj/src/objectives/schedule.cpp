#include "gefm/objectives/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace gefm::objectives {

const char* stage_mode_name(StageMode mode) {
  switch (mode) {
    case StageMode::autoencoder: return "autoencoder";
    case StageMode::variational: return "variational";
    case StageMode::crps_finetune: return "crps_finetune";
    case StageMode::mse: return "mse";
    case StageMode::nll: return "nll";
  }
  return "?";
}

StageMode parse_stage_mode(const std::string& name) {
  for (auto m : {StageMode::autoencoder, StageMode::variational, StageMode::crps_finetune, StageMode::mse,
                 StageMode::nll}) {
    if (name == stage_mode_name(m)) return m;
  }
  throw std::invalid_argument("unknown stage mode '" + name +
                              "' (expected autoencoder, variational, crps_finetune, mse or nll)");
}

void validate_stage(const StageConfig& s, std::size_t index) {
  const auto where = "training stage " + std::to_string(index + 1) + ": ";
  if (s.unroll == 0) throw std::invalid_argument(where + "unroll must be at least 1");
  if (!(s.learning_rate > 0) || !std::isfinite(s.learning_rate)) {
    throw std::invalid_argument(where + "learning_rate must be positive");
  }
  if (!(s.lambda_kl >= 0) || !(s.lambda_crps >= 0)) throw std::invalid_argument(where + "lambdas must be >= 0");
  if (s.mode == StageMode::autoencoder && s.lambda_kl != 0) {
    throw std::invalid_argument(where + "autoencoder stages train without the KL term (lambda_kl = 0)");
  }
  if (s.mode == StageMode::crps_finetune && s.lambda_crps == 0) {
    throw std::invalid_argument(where + "crps_finetune needs lambda_crps > 0");
  }
}

std::vector<StageConfig> default_graph_efm_schedule(bool lam) {
  const double kl = lam ? 1.0 : 0.1;
  return {
      {StageMode::autoencoder, 6, 1e-3, 1, 0.0, 0.0},
      {StageMode::variational, 6, 1e-3, 1, kl, 0.0},
      {StageMode::variational, 3, 5e-4, 2, kl, 0.0},
      {StageMode::crps_finetune, 3, 5e-4, 3, kl, 1.0},
  };
}

std::vector<StageConfig> default_deterministic_schedule(bool with_sigma) {
  const auto mode = with_sigma ? StageMode::nll : StageMode::mse;
  return {
      {mode, 12, 1e-3, 1, 0.0, 0.0},
      {mode, 3, 5e-4, 2, 0.0, 0.0},
      {mode, 3, 5e-4, 3, 0.0, 0.0},
  };
}

}  // namespace gefm::objectives
