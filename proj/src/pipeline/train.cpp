#include "gefm/pipeline/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "gefm/metrics/metrics.hpp"
#include "gefm/numcore/adamw.hpp"
#include "gefm/numcore/autodiff.hpp"
#include "gefm/numcore/ops.hpp"
#include "gefm/numcore/rng.hpp"
#include "gefm/pipeline/io.hpp"

namespace gefm::pipeline {

using json = nlohmann::json;
using num::Tensor;
using objectives::StageMode;

Experiment make_experiment(const RunConfig& config, const Dataset& data, mesh::MeshGraph graph) {
  data.validate();
  if (!data.normalized) throw std::invalid_argument("training and evaluation need a normalized dataset");
  if (!(graph.grid == data.grid)) throw std::invalid_argument("graph was built for a different grid than the dataset");
  if (graph.kind != models::required_graph_kind(config.model.variant)) {
    throw std::invalid_argument(std::string("graph kind does not suit variant ") +
                                models::variant_name(config.model.variant));
  }
  std::size_t width = config.boundary_width;
  if (width == 0) width = data.boundary_width;
  if (data.boundary_width != width) {
    throw std::invalid_argument("config boundary_width " + std::to_string(width) + " differs from the dataset's " +
                                std::to_string(data.boundary_width));
  }
  if (width > 0 && data.grid.geometry != mesh::Geometry::planar) {
    throw std::invalid_argument("boundary forcing needs a limited-area (planar) grid");
  }

  Experiment exp;
  exp.config = config;
  exp.config.boundary_width = width;
  exp.config.model.state_dim = data.state_dim();
  exp.config.model.forcing_dim = data.window_width();
  exp.graph = std::move(graph);
  exp.context = models::make_graph_context(exp.graph);
  exp.model = std::make_shared<const models::Model>(exp.config.model, exp.context);
  exp.mask = make_boundary_mask(data.grid.rows, data.grid.cols, width);

  const auto n = data.nodes();
  exp.metric_weights = metrics::area_weights(data.grid);
  if (width > 0) {
    const auto interior = static_cast<double>(n - exp.mask.frame_count());
    if (interior == 0) throw std::invalid_argument("boundary frame covers the whole grid");
    for (std::size_t a = 0; a < n; ++a) exp.metric_weights[a] = exp.mask.interior[a] * static_cast<double>(n) / interior;
  }

  exp.weights.area = exp.metric_weights;
  exp.weights.level.assign(data.state_dim(), 1.0);
  const auto& tr = data.splits.train;
  if (tr.size() < 2) throw std::invalid_argument("training split needs at least 2 steps");
  std::vector<std::vector<Tensor>> trajectories{
      std::vector<Tensor>(data.fields.begin() + static_cast<std::ptrdiff_t>(tr.begin),
                          data.fields.begin() + static_cast<std::ptrdiff_t>(tr.end))};
  exp.weights.var_inv = objectives::inverse_difference_variance(trajectories);
  exp.weights.validate(n, data.state_dim());
  return exp;
}

objectives::Window make_window(const Dataset& data, std::size_t s, std::size_t steps) {
  if (s < 2 || s + steps >= data.steps()) {
    throw std::out_of_range("window starting at " + std::to_string(s) + " with " + std::to_string(steps) +
                            " steps does not fit the dataset");
  }
  objectives::Window w;
  w.x_prev2 = data.fields[s - 2];
  w.x_prev1 = data.fields[s - 1];
  for (std::size_t t = s; t < s + steps; ++t) {
    w.targets.push_back(data.fields[t]);
    w.forcing.push_back(window_forcing(data, t));
  }
  return w;
}

models::StepHook boundary_hook(const Experiment& exp, const Dataset& data, std::size_t first_target) {
  if (!exp.limited_area()) return {};
  const auto* fields = &data.fields;
  const auto* mask = &exp.mask;
  return [fields, mask, first_target](std::size_t step, const Tensor& state) {
    return apply_boundary(state, fields->at(first_target + step), *mask);
  };
}

std::size_t effective_window_length(const RunConfig& config) {
  if (config.window_length > 0) return config.window_length;
  std::size_t longest = 1;
  for (const auto& s : config.stages) longest = std::max(longest, s.unroll);
  return longest + 2;
}

std::vector<std::size_t> source_windows(const Dataset& data, std::size_t window_length) {
  const auto& tr = data.splits.train;
  std::vector<std::size_t> starts;
  // A chunk [start, start + W) holds two history states and W - 2 targets;
  // the forcing window of the last target reaches one step further.
  for (std::size_t start = tr.begin; start + window_length <= tr.end && start + window_length < data.steps();
       start += window_length) {
    starts.push_back(start);
  }
  return starts;
}

Tensor window_loss(const Experiment& exp, const Dataset& data, const num::ParamStore& params,
                   const objectives::StageConfig& stage, std::size_t first_target, std::uint64_t sample) {
  const auto window = make_window(data, first_target, stage.unroll);
  const auto hook = boundary_hook(exp, data, first_target);
  auto weights = exp.weights;
  switch (stage.mode) {
    case StageMode::mse:
    case StageMode::nll:
      return objectives::deterministic_loss(
          *exp.model, params, window, stage.unroll, weights,
          stage.mode == StageMode::nll ? objectives::DeterministicObjective::nll : objectives::DeterministicObjective::mse,
          hook);
    case StageMode::autoencoder:
    case StageMode::variational:
    case StageMode::crps_finetune:
      weights.lambda_kl = stage.mode == StageMode::autoencoder ? 0.0 : stage.lambda_kl;
      weights.lambda_crps = stage.mode == StageMode::crps_finetune ? stage.lambda_crps : 0.0;
      return objectives::combined_loss(*exp.model, params, window, stage.unroll, weights, {exp.config.seed, sample}, hook)
          .total;
  }
  throw std::logic_error("unhandled stage mode");
}

std::string log_to_csv(const std::vector<EpochLog>& log) {
  std::string out = "stage,mode,epoch,unroll,learning_rate,loss,windows\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%zu,%zu,%.17g,%.17g,%zu\n", e.stage, objectives::stage_mode_name(e.mode),
                  e.epoch, e.unroll, e.learning_rate, e.loss, e.windows);
    out += buf;
  }
  return out;
}

models::Checkpoint make_checkpoint(const Experiment& exp, const Dataset& data, const num::ParamStore& params,
                                   std::size_t stages_completed) {
  models::Checkpoint c;
  c.config = exp.config.model;
  c.params = params;
  c.graph_hash = exp.context->graph_hash;
  json meta;
  meta["run"] = run_config_to_json(exp.config);
  meta["stages_completed"] = stages_completed;
  meta["grid"] = grid_to_json(data.grid);
  meta["variables"] = data.variables;
  meta["normalization"] = {{"mean", data.norm.mean}, {"std", data.norm.std}};
  meta["var_inv"] = exp.weights.var_inv;
  c.metadata = meta.dump();
  return c;
}

Experiment experiment_from_checkpoint(const models::Checkpoint& checkpoint, const Dataset& data,
                                      const std::string& graph_path) {
  json meta;
  try {
    meta = json::parse(checkpoint.metadata);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  if (!meta.contains("run")) throw std::invalid_argument("checkpoint does not record a run configuration");
  auto config = run_config_from_json(meta.at("run").dump());
  if (meta.contains("grid") && !(grid_from_json(meta.at("grid")) == data.grid)) {
    throw std::invalid_argument("checkpoint was trained on a different grid than the dataset");
  }
  auto graph = graph_path.empty() ? build_graph(config.graph, data.grid) : mesh::load_graph(graph_path);
  const auto hash = mesh::graph_hash(graph);
  if (hash != checkpoint.graph_hash) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "graph hash %016llx does not match the checkpoint's %016llx",
                  static_cast<unsigned long long>(hash), static_cast<unsigned long long>(checkpoint.graph_hash));
    throw std::invalid_argument(buf);
  }
  auto exp = make_experiment(config, data, std::move(graph));
  if (!(exp.config.model == checkpoint.config)) {
    throw std::invalid_argument("checkpoint model config does not match the dataset layout");
  }
  return exp;
}

namespace {

bool finite(const num::ParamGrads& grads) {
  for (const auto& [name, g] : grads)
    for (double v : g)
      if (!std::isfinite(v)) return false;
  return true;
}

std::string stage_where(std::size_t stage, StageMode mode, std::size_t epoch, std::size_t step) {
  return "stage " + std::to_string(stage) + " (" + objectives::stage_mode_name(mode) + "), epoch " +
         std::to_string(epoch) + ", step " + std::to_string(step);
}

}  // namespace

TrainResult train(const Experiment& exp, const Dataset& data, const std::string& out_dir,
                  const EpochCallback& on_epoch) {
  return train_from(exp, data, exp.model->init_params(exp.config.init, exp.config.seed), out_dir, on_epoch);
}

TrainResult train_from(const Experiment& exp, const Dataset& data, num::ParamStore params, const std::string& out_dir,
                       const EpochCallback& on_epoch) {
  validate_run_config(exp.config);
  const auto window_length = effective_window_length(exp.config);
  const auto sources = source_windows(data, window_length);
  bool any_epochs = false;
  for (const auto& s : exp.config.stages) any_epochs = any_epochs || s.epochs > 0;
  if (sources.empty() && any_epochs) {
    throw std::invalid_argument("training split of " + std::to_string(data.splits.train.size()) +
                                " steps holds no window of length " + std::to_string(window_length));
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    atomic_write(out_dir + "/run_config.json", run_config_to_json(exp.config).dump(2) + "\n");
  }

  TrainResult result;
  result.initial = params;
  num::AdamWState opt_state;
  std::uint64_t sample = 0;
  std::size_t step = 0;
  const auto batch = exp.config.batch_size;

  for (std::size_t si = 0; si < exp.config.stages.size(); ++si) {
    const auto& stage = exp.config.stages[si];
    const num::AdamWConfig opt{stage.learning_rate, 0.9, 0.999, 1e-8, exp.config.weight_decay};
    for (std::size_t epoch = 0; epoch < stage.epochs; ++epoch) {
      num::RngStream rng({exp.config.seed, num::Purpose::shuffle, si, epoch});
      std::vector<std::size_t> order(sources.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      std::vector<std::size_t> targets;
      const auto slack = window_length - 2 - stage.unroll;
      for (auto idx : order) targets.push_back(sources[idx] + 2 + rng.below(slack + 1));

      double epoch_loss = 0.0;
      for (std::size_t b = 0; b < targets.size(); b += batch) {
        const auto end = std::min(targets.size(), b + batch);
        ++step;
        const auto where = stage_where(si + 1, stage.mode, epoch + 1, step);
        Tensor loss;
        try {
          Tensor total = Tensor::scalar(0.0);
          for (std::size_t i = b; i < end; ++i) total = num::add(total, window_loss(exp, data, params, stage, targets[i], sample++));
          loss = num::scale(total, 1.0 / static_cast<double>(end - b));
        } catch (const num::NumericalError& e) {
          throw num::NumericalError("training diverged at " + where + ": " + e.what());
        }
        const double value = loss.item();
        if (!std::isfinite(value)) throw num::NumericalError("training diverged at " + where + ": loss is not finite");
        const auto grads = num::collect_grads(params, num::backward(loss));
        if (!finite(grads)) throw num::NumericalError("training diverged at " + where + ": gradient is not finite");
        auto next = num::adamw_step(params, grads, std::move(opt_state), opt);
        params = std::move(next.params);
        opt_state = std::move(next.state);
        epoch_loss += value * static_cast<double>(end - b);
      }
      EpochLog entry{si + 1, stage.mode, epoch + 1, stage.unroll, stage.learning_rate,
                     epoch_loss / static_cast<double>(targets.size()), targets.size()};
      result.log.push_back(entry);
      if (on_epoch) on_epoch(entry);
    }
    if (!out_dir.empty()) {
      const auto path = out_dir + "/stage_" + std::to_string(si + 1) + ".ckpt";
      models::save_checkpoint(make_checkpoint(exp, data, params, si + 1), path);
      result.checkpoints.push_back(path);
    }
  }
  if (!out_dir.empty()) {
    const auto path = out_dir + "/final.ckpt";
    models::save_checkpoint(make_checkpoint(exp, data, params, exp.config.stages.size()), path);
    result.checkpoints.push_back(path);
    atomic_write(out_dir + "/train_log.csv", log_to_csv(result.log));
  }
  result.params = std::move(params);
  return result;
}

}  // namespace gefm::pipeline
