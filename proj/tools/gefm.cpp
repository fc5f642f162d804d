// Command-line front end: graph construction, synthetic data, training,
// forecasting and evaluation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gefm/meshgraph/graph.hpp"
#include "gefm/models/checkpoint.hpp"
#include "gefm/pipeline/config.hpp"
#include "gefm/pipeline/dataset.hpp"
#include "gefm/pipeline/evaluate.hpp"
#include "gefm/pipeline/io.hpp"
#include "gefm/pipeline/train.hpp"

namespace {

using namespace gefm;
using json = nlohmann::json;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct GraphFlags {
  std::string kind = "hier", geometry = "global", layout = "cell-centred";
  std::size_t rows = 12, cols = 24, refinements = 1, levels = 2, multiscale_levels = 2, mesh_n = 0;
  double padding = 0.5;
  std::string graph_path;

  void add(CLI::App* app, bool with_path) {
    app->add_option("--kind", kind, "multiscale or hier")->check(CLI::IsMember({"multiscale", "hier"}));
    app->add_option("--geometry", geometry, "global or lam")->check(CLI::IsMember({"global", "lam"}));
    app->add_option("--layout", layout, "global grid layout: cell-centred or poles")
        ->check(CLI::IsMember({"cell-centred", "poles"}));
    app->add_option("--rows", rows, "grid rows");
    app->add_option("--cols", cols, "grid columns");
    app->add_option("--refinements", refinements, "icosphere refinements (global)");
    app->add_option("--levels", levels, "hierarchy levels");
    app->add_option("--multiscale-levels", multiscale_levels, "levels merged by a LAM multiscale mesh");
    app->add_option("--mesh-n", mesh_n, "finest LAM mesh lattice extent (0 = automatic)");
    app->add_option("--padding", padding, "LAM mesh extent padding in grid cells");
    if (with_path) app->add_option("--graph", graph_path, "load this graph instead of building one");
  }

  mesh::MeshGraph build() const {
    if (!graph_path.empty()) return mesh::load_graph(graph_path);
    pipeline::GraphSpec spec;
    spec.geometry = geometry == "global" ? mesh::Geometry::spherical : mesh::Geometry::planar;
    spec.kind = kind == "multiscale" ? mesh::Kind::multiscale : mesh::Kind::hierarchical;
    spec.refinements = refinements;
    spec.levels = levels;
    spec.multiscale_levels = multiscale_levels;
    spec.mesh_n = mesh_n;
    spec.extent_padding = padding;
    mesh::GridSpec grid;
    if (spec.geometry == mesh::Geometry::planar) {
      grid = mesh::GridSpec::planar(rows, cols);
    } else if (layout == "poles") {
      grid = mesh::GridSpec::latlon_with_poles(rows, cols);
    } else {
      grid = mesh::GridSpec::latlon_cell_centred(rows, cols);
    }
    return pipeline::build_graph(spec, grid);
  }
};

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw std::invalid_argument("--grid must look like ROWSxCOLS, got '" + text + "'");
  try {
    return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw std::invalid_argument("--grid must look like ROWSxCOLS, got '" + text + "'");
  }
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("--sweep-sizes must be a comma-separated list of integers");
    }
  }
  return out;
}

void print_epoch(const pipeline::EpochLog& e) {
  std::printf("stage %zu %-13s epoch %3zu  unroll %zu  lr %.1e  loss %.6g\n", e.stage,
              objectives::stage_mode_name(e.mode), e.epoch, e.unroll, e.learning_rate, e.loss);
  std::fflush(stdout);
}

int run(int argc, char** argv) {
  CLI::App app{"Graph-based ensemble forecasting on toy grids"};
  app.require_subcommand(1);

  // graph
  auto* graph = app.add_subcommand("graph", "build, summarize or check mesh graphs");
  graph->require_subcommand(1);
  GraphFlags gbuild, gstats, gcheck;
  std::string graph_out;
  auto* g_build = graph->add_subcommand("build", "build a graph and write it as JSON");
  gbuild.add(g_build, false);
  g_build->add_option("--out", graph_out, "output path")->required();
  auto* g_stats = graph->add_subcommand("stats", "print node and edge counts");
  gstats.add(g_stats, true);
  auto* g_check = graph->add_subcommand("check", "run structural checks");
  gcheck.add(g_check, true);

  // data
  auto* data = app.add_subcommand("data", "synthetic datasets");
  data->require_subcommand(1);
  auto* synth = data->add_subcommand("synth", "generate a synthetic dataset");
  pipeline::SynthOptions so;
  std::string grid_text = "12x24", geometry = "global", data_out;
  bool raw = false;
  synth->add_option("--grid", grid_text, "ROWSxCOLS");
  synth->add_option("--geometry", geometry, "global or lam")->check(CLI::IsMember({"global", "lam"}));
  synth->add_option("--steps", so.steps, "number of time steps");
  synth->add_option("--seed", so.seed, "random seed");
  synth->add_option("--state-dim", so.state_dim, "number of state variables");
  synth->add_option("--boundary-width", so.boundary_width, "boundary frame width (LAM)");
  synth->add_option("--advection", so.advection, "rotation rate in radians per step");
  synth->add_option("--diffusion", so.diffusion, "diffusion coefficient");
  synth->add_option("--noise", so.noise, "noise amplitude");
  synth->add_flag("--diffusion-only", so.diffusion_only, "zero advection, relaxation and noise");
  synth->add_flag("--raw", raw, "store unnormalized fields");
  synth->add_option("--out", data_out, "output path (writes PATH.bin and PATH.json)")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model from a run config");
  std::string config_path, train_data, train_graph, train_out;
  bool quiet = false;
  train->add_option("--config", config_path, "run config (JSON)")->required();
  train->add_option("--data", train_data, "dataset path");
  train->add_option("--graph", train_graph, "graph file (default: build from the config)");
  train->add_option("--out", train_out, "output directory");
  train->add_flag("--quiet", quiet, "do not print per-epoch losses");

  // forecast
  auto* forecast = app.add_subcommand("forecast", "roll out a forecast from one initialization");
  std::string fc_ckpt, fc_data, fc_graph, fc_out;
  std::size_t fc_init = 1, fc_steps = 4, fc_k = 1, fc_threads = 0;
  std::uint64_t fc_seed = 0;
  forecast->add_option("--checkpoint", fc_ckpt, "checkpoint path")->required();
  forecast->add_option("--data", fc_data, "dataset path")->required();
  forecast->add_option("--graph", fc_graph, "graph file (default: rebuild from the checkpoint)");
  forecast->add_option("--init-time", fc_init, "time index of the initial state X^0");
  forecast->add_option("--T", fc_steps, "number of steps");
  forecast->add_option("--ensemble", fc_k, "ensemble members (probabilistic models)");
  forecast->add_option("--seed", fc_seed, "sampling seed");
  forecast->add_option("--threads", fc_threads, "worker threads (0 = all cores)");
  forecast->add_option("--out", fc_out, "output path (writes PATH.bin and PATH.json)")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score forecasts over a data split");
  std::string ev_ckpt, ev_data, ev_graph, ev_report, ev_plots, ev_sweep, ev_mode, ev_label, ev_split;
  std::size_t ev_k = 0, ev_leads = 0, ev_stride = 0, ev_threads = 0;
  std::uint64_t ev_seed = 0;
  bool ev_seed_set = false;
  evaluate->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  evaluate->add_option("--data", ev_data, "dataset path")->required();
  evaluate->add_option("--graph", ev_graph, "graph file (default: rebuild from the checkpoint)");
  evaluate->add_option("--ensemble", ev_k, "ensemble size (default: from the run config)");
  evaluate->add_option("--sweep-sizes", ev_sweep, "comma-separated ensemble sizes to sweep");
  evaluate->add_option("--sweep-mode", ev_mode, "resample or prefix")->check(CLI::IsMember({"resample", "prefix"}));
  evaluate->add_option("--lead-times", ev_leads, "number of lead times");
  evaluate->add_option("--stride", ev_stride, "initialization stride");
  evaluate->add_option("--split", ev_split, "train, val or test");
  auto* seed_opt = evaluate->add_option("--seed", ev_seed, "sampling seed");
  evaluate->add_option("--threads", ev_threads, "worker threads (0 = all cores)");
  evaluate->add_option("--label", ev_label, "model name in the report");
  evaluate->add_option("--report", ev_report, "metric report path (CSV)");
  evaluate->add_option("--plots", ev_plots, "directory for SVG plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  ev_seed_set = seed_opt->count() > 0;

  if (g_build->parsed()) {
    const auto g = gbuild.build();
    mesh::save_graph(g, graph_out);
    std::printf("%s", mesh::graph_stats(g).to_text().c_str());
    std::printf("hash %016llx\nwrote %s\n", static_cast<unsigned long long>(mesh::graph_hash(g)), graph_out.c_str());
    return kOk;
  }
  if (g_stats->parsed()) {
    const auto g = gstats.build();
    std::printf("%s", mesh::graph_stats(g).to_text().c_str());
    std::printf("hash %016llx\n", static_cast<unsigned long long>(mesh::graph_hash(g)));
    return kOk;
  }
  if (g_check->parsed()) {
    const auto g = gcheck.build();
    const auto problems = mesh::validate(g);
    for (const auto& p : problems) std::printf("problem: %s\n", p.c_str());
    std::printf("%s\n", problems.empty() ? "graph OK" : "graph has problems");
    return problems.empty() ? kOk : 1;
  }
  if (synth->parsed()) {
    std::tie(so.rows, so.cols) = parse_grid(grid_text);
    so.planar = geometry == "lam";
    auto d = pipeline::synth_data(so);
    if (!raw) pipeline::normalize_dataset(d);
    pipeline::save_dataset(d, data_out);
    std::printf("wrote %s and %s (%zu steps, %zu nodes, %zu variables)\n",
                pipeline::dataset_bin_path(data_out).c_str(), pipeline::dataset_json_path(data_out).c_str(),
                d.steps(), d.nodes(), d.state_dim());
    return kOk;
  }
  if (train->parsed()) {
    auto config = pipeline::run_config_from_json(pipeline::read_file(config_path));
    if (!train_data.empty()) config.data_path = train_data;
    if (!train_graph.empty()) config.graph_path = train_graph;
    if (!train_out.empty()) config.out_dir = train_out;
    if (config.data_path.empty()) throw std::invalid_argument("no dataset: pass --data or set paths.data");
    if (config.out_dir.empty()) throw std::invalid_argument("no output directory: pass --out or set paths.out");
    const auto d = pipeline::load_dataset(config.data_path);
    auto g = config.graph_path.empty() ? pipeline::build_graph(config.graph, d.grid) : mesh::load_graph(config.graph_path);
    const auto exp = pipeline::make_experiment(config, d, std::move(g));
    const auto result = pipeline::train(exp, d, config.out_dir, quiet ? pipeline::EpochCallback{} : print_epoch);
    for (const auto& p : result.checkpoints) std::printf("wrote %s\n", p.c_str());
    return kOk;
  }
  if (forecast->parsed()) {
    const auto ckpt = models::load_checkpoint(fc_ckpt);
    const auto d = pipeline::load_dataset(fc_data);
    const auto exp = pipeline::experiment_from_checkpoint(ckpt, d, fc_graph);
    const bool prob = models::is_probabilistic(exp.config.model.variant);
    const auto input = pipeline::forecast_input(exp, d, fc_init, fc_steps);
    std::vector<models::Trajectory> members;
    if (prob) {
      members = models::sample_ensemble(*exp.model, ckpt.params, input, fc_steps, fc_k, fc_seed, fc_threads).members;
    } else {
      members.push_back(models::rollout_deterministic(*exp.model, ckpt.params, input, fc_steps));
    }
    std::string payload;
    for (const auto& m : members)
      for (const auto& x : m)
        for (double v : pipeline::denormalize(x, d.norm).data()) pipeline::write_f64_le(payload, v);
    json side = {{"format", "gefm-forecast"},
                 {"members", members.size()},
                 {"steps", fc_steps},
                 {"nodes", d.nodes()},
                 {"state_dim", d.state_dim()},
                 {"init_time", fc_init},
                 {"seed", fc_seed},
                 {"variables", d.variables},
                 {"units", d.units},
                 {"layout", "members, steps, nodes, variables; little-endian float64; denormalized"},
                 {"grid", pipeline::grid_to_json(d.grid)}};
    pipeline::atomic_write(pipeline::dataset_bin_path(fc_out), payload);
    pipeline::atomic_write(pipeline::dataset_json_path(fc_out), side.dump(2) + "\n");
    std::printf("wrote %zu member(s) x %zu steps to %s\n", members.size(), fc_steps,
                pipeline::dataset_bin_path(fc_out).c_str());
    return kOk;
  }
  if (evaluate->parsed()) {
    const auto ckpt = models::load_checkpoint(ev_ckpt);
    const auto d = pipeline::load_dataset(ev_data);
    const auto exp = pipeline::experiment_from_checkpoint(ckpt, d, ev_graph);
    const auto& ec = exp.config.eval;
    pipeline::EvalOptions o;
    o.model_label = ev_label.empty() ? exp.config.name : ev_label;
    o.probabilistic = models::is_probabilistic(exp.config.model.variant);
    o.ensemble = ev_k ? ev_k : ec.ensemble;
    o.lead_times = ev_leads ? ev_leads : ec.lead_times;
    o.init_stride = ev_stride ? ev_stride : ec.init_stride;
    o.sweep_sizes = ev_sweep.empty() ? ec.sweep_sizes : parse_sizes(ev_sweep);
    o.sweep_mode = ev_mode.empty() ? ec.sweep_mode
                                   : (ev_mode == "prefix" ? pipeline::SweepMode::prefix : pipeline::SweepMode::resample);
    o.seed = ev_seed_set ? ev_seed : ec.seed;
    o.split = ev_split.empty() ? ec.split : ev_split;
    const auto fc =
        pipeline::model_forecaster(exp, d, ckpt.params, o.lead_times, ev_threads ? ev_threads : ec.threads);
    const auto result = pipeline::evaluate(fc, d, exp.metric_weights, o);
    const auto csv = metrics::to_csv(result.rows);
    if (ev_report.empty()) {
      std::printf("%s", csv.c_str());
    } else {
      pipeline::atomic_write(ev_report, csv);
      std::printf("wrote %s (%zu rows, %zu initializations)\n", ev_report.c_str(), result.rows.size(),
                  result.inits.size());
    }
    if (!ev_plots.empty()) {
      for (const auto& p : pipeline::write_plots(result.rows, ev_plots)) std::printf("wrote %s\n", p.c_str());
    }
    return kOk;
  }
  return kConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const gefm::num::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
