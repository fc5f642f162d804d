#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gefm/meshgraph/grid.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::metrics {

/// One forecast (or truth) sequence: T fields of shape [grid nodes, variables].
using Sequence = std::vector<num::Tensor>;
/// K member sequences forecast from one initialization.
using EnsembleForecast = std::vector<Sequence>;
/// Metric values indexed [lead time][variable].
using LeadVarTable = std::vector<std::vector<double>>;

/// cos(latitude) normalized to mean 1 on the sphere; all ones in the plane.
std::vector<double> area_weights(const mesh::GridSpec& grid);

/// sqrt of the sample- and area-averaged squared error, per (lead, variable).
LeadVarTable rmse(const std::vector<Sequence>& forecasts, const std::vector<Sequence>& truth,
                  std::span<const double> weights);

/// RMSE of the member average.
LeadVarTable ensemble_mean_rmse(const std::vector<EnsembleForecast>& ensembles, const std::vector<Sequence>& truth,
                                std::span<const double> weights);

/// sqrt of the averaged squared member deviation from the ensemble mean
/// (1/K normalization over members).
LeadVarTable spread(const std::vector<EnsembleForecast>& ensembles, std::span<const double> weights);

/// sqrt((K+1)/K) * Spread / RMSE. Cells with zero RMSE hold NaN, which the
/// report writes as NA.
LeadVarTable spread_skill_ratio(const std::vector<EnsembleForecast>& ensembles, const std::vector<Sequence>& truth,
                                std::span<const double> weights);

/// Fair finite-ensemble CRPS of one scalar ensemble, computed by sorting.
/// With a single member this is the absolute error.
double fair_crps(std::span<const double> members, double observation);

/// Area-weighted mean of fair_crps over samples and grid nodes.
LeadVarTable ensemble_crps(const std::vector<EnsembleForecast>& ensembles, const std::vector<Sequence>& truth,
                           std::span<const double> weights);

/// Mean absolute error (the CRPS of a point forecast).
LeadVarTable mae(const std::vector<Sequence>& forecasts, const std::vector<Sequence>& truth,
                 std::span<const double> weights);

/// Keeps the first `k` members of every ensemble.
std::vector<EnsembleForecast> member_prefix(const std::vector<EnsembleForecast>& ensembles, std::size_t k);

struct MetricRow {
  std::string model;
  std::string variable;
  std::size_t lead_time_steps = 0;
  std::string metric;
  double value = 0.0;
  std::size_t samples = 0;
  std::size_t members = 0;
};

/// Appends one row per (lead, variable) cell; lead times are 1-based.
void append_rows(std::vector<MetricRow>& rows, const std::string& model, const std::vector<std::string>& variables,
                 const std::string& metric, const LeadVarTable& table, std::size_t samples, std::size_t members);

/// Header `model,variable,lead_time_steps,metric,value,S,K`; values with 17
/// significant digits, NaN as NA.
std::string to_csv(const std::vector<MetricRow>& rows);

}  // namespace gefm::metrics
