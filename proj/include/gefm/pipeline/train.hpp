#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gefm/meshgraph/graph.hpp"
#include "gefm/models/checkpoint.hpp"
#include "gefm/models/model.hpp"
#include "gefm/models/rollout.hpp"
#include "gefm/objectives/losses.hpp"
#include "gefm/pipeline/config.hpp"
#include "gefm/pipeline/dataset.hpp"

namespace gefm::pipeline {

/// A model bound to a graph and a dataset layout, with the loss and metric
/// weights derived from them.
struct Experiment {
  RunConfig config;
  mesh::MeshGraph graph;
  std::shared_ptr<const models::GraphContext> context;
  std::shared_ptr<const models::Model> model;
  objectives::LossWeights weights;  // lambda_kl / lambda_crps set per stage
  BoundaryMask mask;                // width 0 on global grids
  std::vector<double> metric_weights;

  bool limited_area() const { return mask.width > 0; }
};

/// Checks that the dataset is normalized and laid out on the graph's grid,
/// fills state and forcing widths into the model config, and computes
/// area and inverse-variance weights from the training split.
Experiment make_experiment(const RunConfig& config, const Dataset& data, mesh::MeshGraph graph);

/// Training window whose first target is X^s.
objectives::Window make_window(const Dataset& data, std::size_t s, std::size_t steps);

/// Overwrites the boundary frame of predicted step k with the truth at
/// first_target + k. Empty on global grids.
models::StepHook boundary_hook(const Experiment& exp, const Dataset& data, std::size_t first_target);

/// First-target indices of the source windows in the training split.
std::vector<std::size_t> source_windows(const Dataset& data, std::size_t window_length);
std::size_t effective_window_length(const RunConfig& config);

struct EpochLog {
  std::size_t stage = 0;  // 1-based
  objectives::StageMode mode = objectives::StageMode::mse;
  std::size_t epoch = 0;  // 1-based within the stage
  std::size_t unroll = 1;
  double learning_rate = 0.0;
  double loss = 0.0;  // mean over the epoch's windows
  std::size_t windows = 0;
};

struct TrainResult {
  num::ParamStore initial;
  num::ParamStore params;
  std::vector<EpochLog> log;
  std::vector<std::string> checkpoints;  // written paths, one per stage then the final one
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Runs the configured stages in order from a fresh initialization. Writes
/// `train_log.csv`, `run_config.json`, `stage_<i>.ckpt` and `final.ckpt` to
/// `out_dir` when it is non-empty. Throws NumericalError naming the stage,
/// epoch and step on a non-finite loss or gradient.
TrainResult train(const Experiment& exp, const Dataset& data, const std::string& out_dir = "",
                  const EpochCallback& on_epoch = {});

/// Continues from the given parameters instead of a fresh initialization.
TrainResult train_from(const Experiment& exp, const Dataset& data, num::ParamStore params,
                       const std::string& out_dir = "", const EpochCallback& on_epoch = {});

/// Loss of one window under a stage, as used by the training loop.
num::Tensor window_loss(const Experiment& exp, const Dataset& data, const num::ParamStore& params,
                        const objectives::StageConfig& stage, std::size_t first_target, std::uint64_t sample);

std::string log_to_csv(const std::vector<EpochLog>& log);

/// Checkpoint carrying the run config, dataset statistics and graph spec.
models::Checkpoint make_checkpoint(const Experiment& exp, const Dataset& data, const num::ParamStore& params,
                                   std::size_t stages_completed);

/// Rebuilds the experiment recorded in a checkpoint and checks the graph hash.
Experiment experiment_from_checkpoint(const models::Checkpoint& checkpoint, const Dataset& data,
                                      const std::string& graph_path = "");

}  // namespace gefm::pipeline
