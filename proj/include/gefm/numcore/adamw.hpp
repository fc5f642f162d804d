#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gefm/numcore/params.hpp"

namespace gefm::num {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  std::int64_t step_count = 0;
};

struct AdamWResult {
  ParamStore params;
  AdamWState state;
};

/// One decoupled-weight-decay Adam update:
///   p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
AdamWResult adamw_step(const ParamStore& params, const ParamGrads& grads, AdamWState state,
                       const AdamWConfig& config);

}  // namespace gefm::num
