#include "gefm/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "gefm/meshgraph/geometry.hpp"

namespace gefm::metrics {

using num::Tensor;

std::vector<double> area_weights(const mesh::GridSpec& grid) {
  const auto n = grid.rows * grid.cols;
  if (n == 0) throw std::invalid_argument("area_weights: empty grid");
  if (grid.geometry == mesh::Geometry::planar) return std::vector<double>(n, 1.0);
  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t r = 0; r < grid.rows; ++r) {
    const double c = std::max(0.0, std::cos(mesh::deg2rad(grid.lat0 + grid.dlat * static_cast<double>(r))));
    for (std::size_t col = 0; col < grid.cols; ++col) w[r * grid.cols + col] = c;
    total += c * static_cast<double>(grid.cols);
  }
  if (!(total > 0)) throw std::invalid_argument("area_weights: all rows at the poles");
  for (auto& v : w) v *= static_cast<double>(n) / total;
  return w;
}

namespace {

struct Dims {
  std::size_t samples, leads, nodes, vars;
};

Dims check_truth(const std::vector<Sequence>& truth, std::span<const double> weights) {
  if (truth.empty()) throw std::invalid_argument("metrics: no samples");
  const auto& first = truth.front();
  if (first.empty()) throw std::invalid_argument("metrics: empty sequences");
  Dims d{truth.size(), first.size(), first.front().rows(), first.front().cols()};
  if (weights.size() != d.nodes) throw num::ShapeError("metrics: weight count does not match grid nodes");
  for (const auto& seq : truth) {
    if (seq.size() != d.leads) throw num::ShapeError("metrics: sequences differ in length");
    for (const auto& x : seq)
      if (x.rows() != d.nodes || x.cols() != d.vars) throw num::ShapeError("metrics: field shapes differ");
  }
  return d;
}

void check_like(const Sequence& seq, const Dims& d) {
  if (seq.size() < d.leads) throw num::ShapeError("metrics: forecast shorter than truth");
  for (std::size_t t = 0; t < d.leads; ++t) {
    if (seq[t].rows() != d.nodes || seq[t].cols() != d.vars) throw num::ShapeError("metrics: forecast shape differs");
  }
}

void check_ensembles(const std::vector<EnsembleForecast>& ens, const Dims& d) {
  if (ens.size() != d.samples) throw num::ShapeError("metrics: ensemble count differs from sample count");
  const auto k = ens.front().size();
  for (const auto& e : ens) {
    if (e.empty()) throw std::invalid_argument("metrics: empty ensemble");
    if (e.size() != k) throw num::ShapeError("metrics: ensembles differ in size");
    for (const auto& m : e) check_like(m, d);
  }
}

LeadVarTable zeros(const Dims& d) { return LeadVarTable(d.leads, std::vector<double>(d.vars, 0.0)); }

// Accumulates sum_a w_a f(s, t, a, j) into table[t][j] and divides by S N.
template <class F>
LeadVarTable weighted_average(const Dims& d, std::span<const double> w, F&& f) {
  auto table = zeros(d);
  for (std::size_t s = 0; s < d.samples; ++s)
    for (std::size_t t = 0; t < d.leads; ++t)
      for (std::size_t a = 0; a < d.nodes; ++a)
        for (std::size_t j = 0; j < d.vars; ++j) table[t][j] += w[a] * f(s, t, a, j);
  const double norm = 1.0 / static_cast<double>(d.samples * d.nodes);
  for (auto& row : table)
    for (auto& v : row) v *= norm;
  return table;
}

LeadVarTable sqrt_table(LeadVarTable t) {
  for (auto& row : t)
    for (auto& v : row) v = std::sqrt(v);
  return t;
}

std::vector<Sequence> ensemble_means(const std::vector<EnsembleForecast>& ens, const Dims& d) {
  std::vector<Sequence> out(d.samples);
  for (std::size_t s = 0; s < d.samples; ++s) {
    const auto k = ens[s].size();
    for (std::size_t t = 0; t < d.leads; ++t) {
      // Offsetting by the first member keeps a collapsed ensemble's mean exact.
      const auto x0 = ens[s].front()[t].data();
      std::vector<double> offset(d.nodes * d.vars, 0.0);
      for (const auto& member : ens[s]) {
        const auto x = member[t].data();
        for (std::size_t i = 0; i < offset.size(); ++i) offset[i] += x[i] - x0[i];
      }
      std::vector<double> mean(offset.size());
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = x0[i] + offset[i] / static_cast<double>(k);
      out[s].push_back(Tensor::from({d.nodes, d.vars}, std::move(mean)));
    }
  }
  return out;
}

}  // namespace

LeadVarTable rmse(const std::vector<Sequence>& forecasts, const std::vector<Sequence>& truth,
                  std::span<const double> weights) {
  const auto d = check_truth(truth, weights);
  if (forecasts.size() != d.samples) throw num::ShapeError("rmse: forecast count differs from sample count");
  for (const auto& f : forecasts) check_like(f, d);
  return sqrt_table(weighted_average(d, weights, [&](std::size_t s, std::size_t t, std::size_t a, std::size_t j) {
    const double e = forecasts[s][t].at(a, j) - truth[s][t].at(a, j);
    return e * e;
  }));
}

LeadVarTable mae(const std::vector<Sequence>& forecasts, const std::vector<Sequence>& truth,
                 std::span<const double> weights) {
  const auto d = check_truth(truth, weights);
  if (forecasts.size() != d.samples) throw num::ShapeError("mae: forecast count differs from sample count");
  for (const auto& f : forecasts) check_like(f, d);
  return weighted_average(d, weights, [&](std::size_t s, std::size_t t, std::size_t a, std::size_t j) {
    return std::fabs(forecasts[s][t].at(a, j) - truth[s][t].at(a, j));
  });
}

LeadVarTable ensemble_mean_rmse(const std::vector<EnsembleForecast>& ensembles, const std::vector<Sequence>& truth,
                                std::span<const double> weights) {
  const auto d = check_truth(truth, weights);
  check_ensembles(ensembles, d);
  return rmse(ensemble_means(ensembles, d), truth, weights);
}

LeadVarTable spread(const std::vector<EnsembleForecast>& ensembles, std::span<const double> weights) {
  if (ensembles.empty() || ensembles.front().empty()) throw std::invalid_argument("spread: empty ensemble");
  std::vector<Sequence> reference(ensembles.size());
  for (std::size_t s = 0; s < ensembles.size(); ++s) reference[s] = ensembles[s].front();
  const auto d = check_truth(reference, weights);
  check_ensembles(ensembles, d);
  const auto means = ensemble_means(ensembles, d);
  const double k = static_cast<double>(ensembles.front().size());
  return sqrt_table(weighted_average(d, weights, [&](std::size_t s, std::size_t t, std::size_t a, std::size_t j) {
    double acc = 0.0;
    const double m = means[s][t].at(a, j);
    for (const auto& member : ensembles[s]) {
      const double e = member[t].at(a, j) - m;
      acc += e * e;
    }
    return acc / k;
  }));
}

LeadVarTable spread_skill_ratio(const std::vector<EnsembleForecast>& ensembles, const std::vector<Sequence>& truth,
                                std::span<const double> weights) {
  const auto skill = ensemble_mean_rmse(ensembles, truth, weights);
  auto ratio = spread(ensembles, weights);
  const double k = static_cast<double>(ensembles.front().size());
  const double correction = std::sqrt((k + 1.0) / k);
  for (std::size_t t = 0; t < ratio.size(); ++t)
    for (std::size_t j = 0; j < ratio[t].size(); ++j) {
      ratio[t][j] = skill[t][j] > 0 ? correction * ratio[t][j] / skill[t][j] : std::numeric_limits<double>::quiet_NaN();
    }
  return ratio;
}

double fair_crps(std::span<const double> members, double y) {
  const auto k = members.size();
  if (k == 0) throw std::invalid_argument("fair_crps: empty ensemble");
  std::vector<double> x(members.begin(), members.end());
  std::sort(x.begin(), x.end());
  double abs_err = 0.0, pair = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    abs_err += std::fabs(x[i] - y);
    // sum_{i,i'} |x_i - x_i'| = 2 sum_i (2i - K + 1) x_(i)
    pair += (2.0 * static_cast<double>(i) - static_cast<double>(k) + 1.0) * x[i];
  }
  abs_err /= static_cast<double>(k);
  if (k == 1) return abs_err;
  return abs_err - pair / (static_cast<double>(k) * static_cast<double>(k - 1));
}

LeadVarTable ensemble_crps(const std::vector<EnsembleForecast>& ensembles, const std::vector<Sequence>& truth,
                           std::span<const double> weights) {
  const auto d = check_truth(truth, weights);
  check_ensembles(ensembles, d);
  std::vector<double> buf;
  return weighted_average(d, weights, [&](std::size_t s, std::size_t t, std::size_t a, std::size_t j) {
    buf.clear();
    for (const auto& member : ensembles[s]) buf.push_back(member[t].at(a, j));
    return fair_crps(buf, truth[s][t].at(a, j));
  });
}

std::vector<EnsembleForecast> member_prefix(const std::vector<EnsembleForecast>& ensembles, std::size_t k) {
  std::vector<EnsembleForecast> out;
  for (const auto& e : ensembles) {
    if (k == 0 || k > e.size()) {
      throw std::invalid_argument("member_prefix: " + std::to_string(k) + " members requested from an ensemble of " +
                                  std::to_string(e.size()));
    }
    out.emplace_back(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

void append_rows(std::vector<MetricRow>& rows, const std::string& model, const std::vector<std::string>& variables,
                 const std::string& metric, const LeadVarTable& table, std::size_t samples, std::size_t members) {
  for (std::size_t t = 0; t < table.size(); ++t) {
    if (table[t].size() != variables.size()) throw num::ShapeError("append_rows: variable names do not match");
    for (std::size_t j = 0; j < variables.size(); ++j) {
      rows.push_back({model, variables[j], t + 1, metric, table[t][j], samples, members});
    }
  }
}

std::string to_csv(const std::vector<MetricRow>& rows) {
  std::string out = "model,variable,lead_time_steps,metric,value,S,K\n";
  char buf[64];
  for (const auto& r : rows) {
    if (std::isnan(r.value)) {
      std::snprintf(buf, sizeof(buf), "NA");
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    }
    out += r.model + "," + r.variable + "," + std::to_string(r.lead_time_steps) + "," + r.metric + "," + buf + "," +
           std::to_string(r.samples) + "," + std::to_string(r.members) + "\n";
  }
  return out;
}

}  // namespace gefm::metrics
