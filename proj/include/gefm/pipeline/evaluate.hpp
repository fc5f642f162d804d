#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gefm/metrics/metrics.hpp"
#include "gefm/pipeline/train.hpp"

namespace gefm::pipeline {

/// Indices t0 of X^0 such that X^{-1}..X^{lead_times} lie in `range` and
/// the forcing of the last lead is available; every `stride`-th one.
std::vector<std::size_t> eligible_inits(const Dataset& data, const TimeRange& range, std::size_t lead_times,
                                        std::size_t stride);

/// Returns `members` normalized forecast sequences of `lead_times` steps
/// from initialization t0. Deterministic forecasters return one sequence.
using Forecaster =
    std::function<metrics::EnsembleForecast(std::size_t t0, std::size_t members, std::uint64_t seed)>;

/// Forecaster backed by a trained model; LAM runs receive boundary forcing.
Forecaster model_forecaster(const Experiment& exp, const Dataset& data, const num::ParamStore& params,
                            std::size_t lead_times, std::size_t threads = 0);

/// Rollout input for a forecast from X^{t0} over `steps` steps.
models::RolloutInput forecast_input(const Experiment& exp, const Dataset& data, std::size_t t0, std::size_t steps);

struct EvalOptions {
  std::string model_label = "model";
  bool probabilistic = true;
  std::size_t ensemble = 20;
  std::size_t lead_times = 4;
  std::size_t init_stride = 1;
  std::vector<std::size_t> sweep_sizes;
  SweepMode sweep_mode = SweepMode::resample;
  std::uint64_t seed = 1234;
  std::string split = "test";
};

struct EvalResult {
  std::vector<metrics::MetricRow> rows;
  std::vector<std::size_t> inits;
};

/// Forecast seed for an initialization and ensemble size.
std::uint64_t forecast_seed(std::uint64_t eval_seed, std::size_t t0, std::size_t members);

/// Rolls out from every eligible initialization, denormalizes, and scores.
/// Deterministic runs report rmse, mae and crps (equal to mae); ensembles
/// report rmse of the mean, spread, spskr and crps, first at the main size,
/// then once per sweep size. Prefix-mode sweep rows carry the label
/// `<model>[prefix]`.
EvalResult evaluate(const Forecaster& forecaster, const Dataset& data, std::span<const double> weights,
                    const EvalOptions& options);

/// One SVG line chart per metric (value against lead time, a line per
/// variable and ensemble size) written as `<dir>/<metric>.svg`.
std::vector<std::string> write_plots(const std::vector<metrics::MetricRow>& rows, const std::string& dir);

}  // namespace gefm::pipeline
