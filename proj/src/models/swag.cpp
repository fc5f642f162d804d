#include "gefm/models/swag.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gefm/numcore/autodiff.hpp"

namespace gefm::models {

std::vector<num::ParamStore> swag_snapshot_ensemble(const num::ParamStore& params0, const LossFn& loss,
                                                    const SwagOptions& options, num::AdamWState state) {
  if (options.save_every == 0) throw std::invalid_argument("swag: save_every must be positive");
  std::vector<num::ParamStore> snapshots;
  num::ParamStore params = params0;
  for (std::size_t step = 0; step < options.steps; ++step) {
    num::Tensor value;
    try {
      value = loss(params, step);
    } catch (const num::NumericalError& e) {
      throw num::NumericalError("swag step " + std::to_string(step + 1) + ": " + e.what());
    }
    if (!std::isfinite(value.item())) {
      throw num::NumericalError("swag step " + std::to_string(step + 1) + ": non-finite loss");
    }
    const auto grads = num::collect_grads(params, num::backward(value));
    if (!std::isfinite(num::grad_norm(grads))) {
      throw num::NumericalError("swag step " + std::to_string(step + 1) + ": non-finite gradient");
    }
    auto next = num::adamw_step(params, grads, std::move(state), options.optimizer);
    params = std::move(next.params);
    state = std::move(next.state);
    if ((step + 1) % options.save_every == 0) snapshots.push_back(params);
  }
  return snapshots;
}

}  // namespace gefm::models
