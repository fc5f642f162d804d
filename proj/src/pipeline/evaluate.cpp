#include "gefm/pipeline/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "gefm/numcore/rng.hpp"
#include "gefm/pipeline/io.hpp"

namespace gefm::pipeline {

using metrics::EnsembleForecast;
using metrics::Sequence;
using num::Tensor;

std::vector<std::size_t> eligible_inits(const Dataset& data, const TimeRange& range, std::size_t lead_times,
                                        std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("init stride must be positive");
  std::vector<std::size_t> out;
  for (std::size_t t0 = std::max<std::size_t>(range.begin + 1, 1); t0 + lead_times < range.end; t0 += stride) {
    if (t0 + lead_times + 1 >= data.steps()) break;
    out.push_back(t0);
  }
  return out;
}

models::RolloutInput forecast_input(const Experiment& exp, const Dataset& data, std::size_t t0, std::size_t steps) {
  if (t0 == 0 || t0 + steps + 1 >= data.steps()) {
    throw std::out_of_range("forecast from step " + std::to_string(t0) + " over " + std::to_string(steps) +
                            " steps needs data outside [0, " + std::to_string(data.steps()) + ")");
  }
  models::RolloutInput in;
  in.x_init_prev = data.fields[t0 - 1];
  in.x_init = data.fields[t0];
  for (std::size_t t = t0 + 1; t <= t0 + steps; ++t) in.forcing.push_back(window_forcing(data, t));
  in.post_step = boundary_hook(exp, data, t0 + 1);
  return in;
}

Forecaster model_forecaster(const Experiment& exp, const Dataset& data, const num::ParamStore& params,
                            std::size_t lead_times, std::size_t threads) {
  return [&exp, &data, &params, lead_times, threads](std::size_t t0, std::size_t members, std::uint64_t seed) {
    const auto input = forecast_input(exp, data, t0, lead_times);
    if (!models::is_probabilistic(exp.config.model.variant)) {
      return EnsembleForecast{models::rollout_deterministic(*exp.model, params, input, lead_times)};
    }
    auto ens = models::sample_ensemble(*exp.model, params, input, lead_times, members, seed, threads);
    return EnsembleForecast(std::move(ens.members));
  };
}

std::uint64_t forecast_seed(std::uint64_t eval_seed, std::size_t t0, std::size_t members) {
  return num::mix64(num::mix64(eval_seed) ^ num::mix64(0x9e3779b97f4a7c15ull * (t0 + 1) + members));
}

namespace {

EnsembleForecast denormalized(const EnsembleForecast& e, const NormStats& stats, std::size_t leads) {
  EnsembleForecast out;
  for (const auto& member : e) {
    if (member.size() < leads) throw num::ShapeError("forecaster returned fewer steps than requested");
    Sequence s;
    for (std::size_t t = 0; t < leads; ++t) s.push_back(denormalize(member[t], stats));
    out.push_back(std::move(s));
  }
  return out;
}

void score(std::vector<metrics::MetricRow>& rows, const std::string& label, const std::vector<std::string>& vars,
           const std::vector<EnsembleForecast>& ens, const std::vector<Sequence>& truth, std::span<const double> w,
           bool probabilistic) {
  const auto s = truth.size();
  const auto k = ens.front().size();
  if (probabilistic) {
    metrics::append_rows(rows, label, vars, "rmse", metrics::ensemble_mean_rmse(ens, truth, w), s, k);
    metrics::append_rows(rows, label, vars, "spread", metrics::spread(ens, w), s, k);
    metrics::append_rows(rows, label, vars, "spskr", metrics::spread_skill_ratio(ens, truth, w), s, k);
    metrics::append_rows(rows, label, vars, "crps", metrics::ensemble_crps(ens, truth, w), s, k);
    return;
  }
  std::vector<Sequence> single;
  for (const auto& e : ens) single.push_back(e.front());
  metrics::append_rows(rows, label, vars, "rmse", metrics::rmse(single, truth, w), s, 1);
  metrics::append_rows(rows, label, vars, "mae", metrics::mae(single, truth, w), s, 1);
  metrics::append_rows(rows, label, vars, "crps", metrics::ensemble_crps(ens, truth, w), s, 1);
}

}  // namespace

EvalResult evaluate(const Forecaster& forecaster, const Dataset& data, std::span<const double> weights,
                    const EvalOptions& o) {
  if (!data.normalized) throw std::invalid_argument("evaluate needs a normalized dataset");
  const auto& range = data.splits.get(o.split);
  EvalResult result;
  result.inits = eligible_inits(data, range, o.lead_times, o.init_stride);
  if (result.inits.empty()) {
    throw std::invalid_argument("the " + o.split + " split has no initialization with " +
                                std::to_string(o.lead_times) + " lead times");
  }
  const auto k_main = o.probabilistic ? o.ensemble : 1;
  if (k_main == 0) throw std::invalid_argument("ensemble size must be positive");
  if (o.probabilistic && o.sweep_mode == SweepMode::prefix) {
    for (auto k : o.sweep_sizes)
      if (k > k_main) throw std::invalid_argument("prefix sweep size exceeds the ensemble size");
  }

  std::vector<Sequence> truth;
  std::vector<EnsembleForecast> main;
  for (auto t0 : result.inits) {
    Sequence y;
    for (std::size_t t = 1; t <= o.lead_times; ++t) y.push_back(denormalize(data.fields[t0 + t], data.norm));
    truth.push_back(std::move(y));
    auto e = forecaster(t0, k_main, forecast_seed(o.seed, t0, k_main));
    if (e.empty()) throw std::invalid_argument("forecaster returned no members");
    main.push_back(denormalized(e, data.norm, o.lead_times));
  }
  score(result.rows, o.model_label, data.variables, main, truth, weights, o.probabilistic);

  if (o.probabilistic) {
    for (auto k : o.sweep_sizes) {
      std::vector<EnsembleForecast> ens;
      std::string label = o.model_label;
      if (o.sweep_mode == SweepMode::prefix) {
        ens = metrics::member_prefix(main, k);
        label += "[prefix]";
      } else {
        for (auto t0 : result.inits) {
          ens.push_back(denormalized(forecaster(t0, k, forecast_seed(o.seed, t0, k)), data.norm, o.lead_times));
        }
      }
      score(result.rows, label, data.variables, ens, truth, weights, true);
    }
  }
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::vector<std::string> write_plots(const std::vector<metrics::MetricRow>& rows, const std::string& dir) {
  // metric -> series label -> (lead, value)
  std::map<std::string, std::map<std::string, std::vector<std::pair<double, double>>>> charts;
  for (const auto& r : rows) {
    const auto series = r.model + " " + r.variable + " K=" + std::to_string(r.members);
    charts[r.metric][series].push_back({static_cast<double>(r.lead_time_steps), r.value});
  }
  std::vector<std::string> written;
  const double width = 640, height = 400, left = 70, right = 210, top = 30, bottom = 50;
  for (const auto& [metric, series] : charts) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& [name, pts] : series)
      for (auto [x, y] : pts) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        if (std::isfinite(y)) {
          ymin = std::min(ymin, y);
          ymax = std::max(ymax, y);
        }
      }
    if (ymin > ymax) ymin = ymax = 0.0;
    ymin = std::min(ymin, 0.0);
    if (ymax <= ymin) ymax = ymin + 1.0;
    if (xmax <= xmin) xmax = xmin + 1.0;
    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
                      fmt(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt(left) + "\" y=\"18\" font-size=\"14\">" + metric + "</text>\n";
    svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top + ph) + "\" x2=\"" + fmt(left + pw) + "\" y2=\"" +
           fmt(top + ph) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(left) + "\" y2=\"" + fmt(top + ph) +
           "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double y = ymin + (ymax - ymin) * i / 4.0;
      svg += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(py(y) + 4) + "\" text-anchor=\"end\">" + fmt(y) +
             "</text>\n";
    }
    for (double x = xmin; x <= xmax + 1e-9; x += 1.0) {
      svg += "<text x=\"" + fmt(px(x)) + "\" y=\"" + fmt(top + ph + 16) + "\" text-anchor=\"middle\">" + fmt(x) +
             "</text>\n";
    }
    svg += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(height - 10) +
           "\" text-anchor=\"middle\">lead time (steps)</text>\n";
    std::size_t idx = 0;
    for (const auto& [name, pts] : series) {
      const char* color = kPalette[idx % std::size(kPalette)];
      std::string path;
      for (auto [x, y] : pts) {
        if (!std::isfinite(y)) continue;
        path += (path.empty() ? "M" : " L") + fmt(px(x)) + " " + fmt(py(y));
      }
      if (!path.empty()) {
        svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
      }
      const double ly = top + 14.0 * static_cast<double>(idx);
      svg += "<line x1=\"" + fmt(left + pw + 10) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(left + pw + 28) +
             "\" y2=\"" + fmt(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
      svg += "<text x=\"" + fmt(left + pw + 32) + "\" y=\"" + fmt(ly + 4) + "\">" + name + "</text>\n";
      ++idx;
    }
    svg += "</svg>\n";
    const auto path = dir + "/" + metric + ".svg";
    atomic_write(path, svg);
    written.push_back(path);
  }
  return written;
}

}  // namespace gefm::pipeline
