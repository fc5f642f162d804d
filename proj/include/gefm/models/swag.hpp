#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "gefm/numcore/adamw.hpp"
#include "gefm/numcore/params.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::models {

/// Scalar training loss for the given parameters at optimizer step `step`.
using LossFn = std::function<num::Tensor(const num::ParamStore& params, std::size_t step)>;

struct SwagOptions {
  std::size_t steps = 0;
  std::size_t save_every = 100;
  num::AdamWConfig optimizer;  // the learning rate stays constant throughout
};

/// Continues optimizing from `params0` and keeps a copy of the parameters
/// after every `save_every`-th step. A non-finite loss or gradient raises
/// NumericalError naming the step.
std::vector<num::ParamStore> swag_snapshot_ensemble(const num::ParamStore& params0, const LossFn& loss,
                                                    const SwagOptions& options, num::AdamWState state = {});

}  // namespace gefm::models
