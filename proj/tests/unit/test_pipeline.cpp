#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>

#include "gefm/models/checkpoint.hpp"
#include "gefm/numcore/autodiff.hpp"
#include "gefm/numcore/ops.hpp"
#include "gefm/pipeline/config.hpp"
#include "gefm/pipeline/dataset.hpp"
#include "gefm/pipeline/evaluate.hpp"
#include "gefm/pipeline/io.hpp"
#include "gefm/pipeline/train.hpp"
#include "support/reference.hpp"

namespace {

using namespace gefm;
namespace gt = gefm::testing;
namespace fs = std::filesystem;
using num::Tensor;
using pipeline::Dataset;

std::string scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gefm_pipeline_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

pipeline::SynthOptions small_global(std::size_t steps = 40, std::uint64_t seed = 5) {
  pipeline::SynthOptions o;
  o.rows = 12;
  o.cols = 24;
  o.steps = steps;
  o.seed = seed;
  return o;
}

Dataset normalized(pipeline::SynthOptions o) {
  auto d = pipeline::synth_data(o);
  pipeline::normalize_dataset(d);
  return d;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::memcmp(&x[i], &y[i], sizeof(double)) != 0) return false;
  return true;
}

bool bit_equal(const Dataset& a, const Dataset& b) {
  if (a.steps() != b.steps() || !(a.grid == b.grid)) return false;
  for (std::size_t t = 0; t < a.steps(); ++t)
    if (!bit_equal(a.fields[t], b.fields[t]) || !bit_equal(a.forcing[t], b.forcing[t])) return false;
  return bit_equal(a.static_forcing, b.static_forcing);
}

pipeline::RunConfig toy_run(models::Variant v) {
  pipeline::RunConfig c;
  c.model.variant = v;
  c.model.d_z = 8;
  c.model.processor_steps = 2;
  c.model.ms_latent_steps = 1;
  c.model.ms_predictor_steps = 2;
  c.model.ms_variational_steps = 1;
  c.graph.kind = models::required_graph_kind(v);
  c.graph.refinements = 1;
  c.graph.levels = 2;
  c.seed = 11;
  return c;
}

pipeline::Experiment experiment(const pipeline::RunConfig& c, const Dataset& d) {
  return pipeline::make_experiment(c, d, pipeline::build_graph(c.graph, d.grid));
}

// ------------------------------------------------------------- synthetic data

TEST(SynthData, SameSeedIsBitIdentical) {
  const auto a = pipeline::synth_data(small_global());
  const auto b = pipeline::synth_data(small_global());
  EXPECT_TRUE(bit_equal(a, b));
  const auto c = pipeline::synth_data(small_global(40, 6));
  EXPECT_FALSE(bit_equal(a, c));
}

TEST(SynthData, ShapeContract) {
  auto o = small_global(17);
  o.state_dim = 3;
  const auto d = pipeline::synth_data(o);
  EXPECT_EQ(d.steps(), 17u);
  for (const auto& f : d.fields) EXPECT_EQ(f.shape(), (num::Shape{12 * 24, 3}));
  for (const auto& f : d.forcing) EXPECT_EQ(f.shape(), (num::Shape{12 * 24, 3}));
  EXPECT_EQ(d.static_forcing.shape(), (num::Shape{12 * 24, 1}));
  EXPECT_EQ(d.variables.size(), 3u);
  EXPECT_EQ(d.window_width(), 10u);
}

TEST(SynthData, DiffusionOnlyVarianceIsNonIncreasing) {
  for (bool planar : {false, true}) {
    auto o = small_global(30);
    o.planar = planar;
    o.rows = planar ? 16 : 12;
    o.diffusion_only = true;
    o.diffusion = 0.2;
    const auto d = pipeline::synth_data(o);
    for (std::size_t j = 0; j < d.state_dim(); ++j) {
      double previous = pipeline::spatial_variance(d, 0, j);
      EXPECT_GT(previous, 0.0);
      for (std::size_t t = 1; t < d.steps(); ++t) {
        const double v = pipeline::spatial_variance(d, t, j);
        EXPECT_LE(v, previous * (1 + 1e-12)) << "planar " << planar << " var " << j << " t " << t;
        previous = v;
      }
      EXPECT_LT(previous, pipeline::spatial_variance(d, 0, j));
    }
  }
}

TEST(SynthData, RejectsDegenerateInputs) {
  auto o = small_global();
  o.rows = 7;
  EXPECT_THROW(pipeline::synth_data(o), std::invalid_argument);
  o = small_global(3);
  EXPECT_THROW(pipeline::synth_data(o), std::invalid_argument);
  o = small_global();
  o.diffusion = 0.3;
  EXPECT_THROW(pipeline::synth_data(o), std::invalid_argument);
}

TEST(SynthData, BoundaryIndicatorChannel) {
  auto o = small_global();
  o.planar = true;
  o.rows = o.cols = 10;
  o.boundary_width = 2;
  const auto d = pipeline::synth_data(o);
  ASSERT_EQ(d.static_names.back(), "boundary");
  std::size_t frame = 0;
  for (std::size_t a = 0; a < d.nodes(); ++a) frame += d.static_forcing.at(a, 1) == 1.0 ? 1 : 0;
  EXPECT_EQ(frame, 100u - 36u);
}

// ----------------------------------------------------------- normalization

TEST(Normalization, TrainingStatisticsAreStandard) {
  const auto d = normalized(small_global(50));
  const auto& tr = d.splits.train;
  for (std::size_t j = 0; j < d.state_dim(); ++j) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (std::size_t t = tr.begin; t < tr.end; ++t)
      for (std::size_t a = 0; a < d.nodes(); ++a) {
        sum += d.fields[t].at(a, j);
        n += 1;
      }
    const double mean = sum / n;
    for (std::size_t t = tr.begin; t < tr.end; ++t)
      for (std::size_t a = 0; a < d.nodes(); ++a) sq += (d.fields[t].at(a, j) - mean) * (d.fields[t].at(a, j) - mean);
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(std::sqrt(sq / n), 1.0, 1e-6);
  }
}

TEST(Normalization, RoundTrip) {
  const auto raw = pipeline::synth_data(small_global(30));
  const auto stats = pipeline::compute_norm_stats(raw);
  for (std::size_t t = 0; t < raw.steps(); t += 7) {
    const auto back = pipeline::denormalize(pipeline::normalize(raw.fields[t], stats), stats);
    for (std::size_t i = 0; i < back.numel(); ++i) EXPECT_NEAR(back[i], raw.fields[t][i], 1e-12);
  }
}

TEST(Normalization, ConstantVariableKeepsUnitScale) {
  Dataset d;
  d.grid = mesh::GridSpec::planar(2, 2);
  d.variables = {"a"};
  d.units = {"1"};
  for (int t = 0; t < 4; ++t) {
    d.fields.push_back(Tensor::full({4, 1}, 3.0));
    d.forcing.push_back(Tensor::zeros({4, 0}));
  }
  d.splits.train = {0, 4};
  const auto s = pipeline::compute_norm_stats(d);
  EXPECT_EQ(s.mean[0], 3.0);
  EXPECT_EQ(s.std[0], 1.0);
}

// ---------------------------------------------------------- forcing windows

TEST(WindowForcing, ConstantForcingRepeatsThreeTimes) {
  auto d = pipeline::synth_data(small_global(10));
  for (auto& f : d.forcing) f = Tensor::full(f.shape(), 0.25);
  const auto w = pipeline::window_forcing(d, 4);
  ASSERT_EQ(w.cols(), d.window_width());
  for (std::size_t a = 0; a < d.nodes(); ++a)
    for (std::size_t c = 0; c < 9; ++c) EXPECT_EQ(w.at(a, c), 0.25);
}

TEST(WindowForcing, MatchesManualSlicing) {
  const auto d = pipeline::synth_data(small_global(10));
  const std::size_t df = d.dynamic_forcing_dim(), ds = d.static_dim();
  for (std::size_t t : {1u, 5u, 8u}) {
    const auto w = pipeline::window_forcing(d, t);
    ASSERT_EQ(w.cols(), 3 * df + ds);
    for (std::size_t a = 0; a < d.nodes(); ++a) {
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t c = 0; c < df; ++c) EXPECT_EQ(w.at(a, k * df + c), d.forcing[t - 1 + k].at(a, c));
      for (std::size_t c = 0; c < ds; ++c) EXPECT_EQ(w.at(a, 3 * df + c), d.static_forcing.at(a, c));
    }
  }
}

TEST(WindowForcing, OutOfRangeThrows) {
  const auto d = pipeline::synth_data(small_global(10));
  EXPECT_THROW(pipeline::window_forcing(d, 0), std::out_of_range);
  EXPECT_THROW(pipeline::window_forcing(d, 9), std::out_of_range);
  EXPECT_NO_THROW(pipeline::window_forcing(d, 8));
}

// ----------------------------------------------------------------- boundary

TEST(Boundary, MaskIsAFrameOfTheGivenWidth) {
  for (std::size_t w : {0u, 1u, 2u, 4u}) {
    const auto m = pipeline::make_boundary_mask(11, 13, w);
    std::size_t frame = 0;
    for (std::size_t r = 0; r < 11; ++r)
      for (std::size_t c = 0; c < 13; ++c) {
        const bool expected = std::min({r, c, 10 - r, 12 - c}) < w;
        EXPECT_EQ(m.frame[r * 13 + c], expected ? 1.0 : 0.0);
        EXPECT_EQ(m.interior[r * 13 + c], expected ? 0.0 : 1.0);
        frame += expected;
      }
    EXPECT_EQ(m.frame_count(), frame);
    EXPECT_EQ(frame, 11 * 13 - (11 - 2 * std::min<std::size_t>(w, 5)) * (13 - 2 * std::min<std::size_t>(w, 5)));
  }
}

TEST(Boundary, ApplyContracts) {
  const auto m = pipeline::make_boundary_mask(6, 7, 2);
  const auto x = gt::random_tensor({42, 3}, 1), b = gt::random_tensor({42, 3}, 2);
  const auto out = pipeline::apply_boundary(x, b, m);
  for (std::size_t a = 0; a < 42; ++a)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.at(a, j), m.frame[a] > 0 ? b.at(a, j) : x.at(a, j));
  EXPECT_TRUE(bit_equal(pipeline::apply_boundary(out, b, m), out));  // idempotent
  EXPECT_TRUE(bit_equal(pipeline::apply_boundary(b, b, m), b));      // fixed point
  const auto none = pipeline::make_boundary_mask(6, 7, 0);
  EXPECT_TRUE(bit_equal(pipeline::apply_boundary(x, b, none), x));
  EXPECT_THROW(pipeline::apply_boundary(gt::random_tensor({40, 3}, 3), gt::random_tensor({40, 3}, 4), m),
               num::ShapeError);
}

TEST(Boundary, GradientFlowsOnlyThroughTheInterior) {
  const auto m = pipeline::make_boundary_mask(5, 5, 1);
  const auto x = gt::random_tensor({25, 2}, 5, 1.0, true);
  const auto b = gt::random_tensor({25, 2}, 6);
  const auto g = num::backward(num::sum(pipeline::apply_boundary(x, b, m))).of(x);
  for (std::size_t a = 0; a < 25; ++a)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(g.at(a, j), m.interior[a]);
}

// --------------------------------------------------------------- dataset IO

TEST(DatasetIo, RoundTripIsBitExact) {
  const auto dir = scratch("io");
  auto o = small_global(12);
  o.planar = true;
  o.rows = o.cols = 9;
  o.boundary_width = 2;
  auto d = pipeline::synth_data(o);
  pipeline::normalize_dataset(d);
  pipeline::save_dataset(d, dir + "/toy");
  const auto e = pipeline::load_dataset(dir + "/toy.json");
  EXPECT_TRUE(bit_equal(d, e));
  EXPECT_EQ(e.variables, d.variables);
  EXPECT_EQ(e.static_names, d.static_names);
  EXPECT_EQ(e.splits.test, d.splits.test);
  EXPECT_EQ(e.norm.mean, d.norm.mean);
  EXPECT_EQ(e.norm.std, d.norm.std);
  EXPECT_TRUE(e.normalized);
  EXPECT_EQ(e.boundary_width, 2u);
}

TEST(DatasetIo, TruncatedPayloadIsRejected) {
  const auto dir = scratch("trunc");
  pipeline::save_dataset(pipeline::synth_data(small_global(6)), dir + "/d");
  auto bytes = pipeline::read_file(dir + "/d.bin");
  bytes.resize(bytes.size() - 8);
  pipeline::atomic_write(dir + "/d.bin", bytes);
  EXPECT_THROW(pipeline::load_dataset(dir + "/d"), std::invalid_argument);
  EXPECT_THROW(pipeline::load_dataset(dir + "/missing"), std::invalid_argument);
}

// ------------------------------------------------------------------ config

TEST(RunConfig, DefaultsAndRoundTrip) {
  const auto c = pipeline::run_config_from_json(R"({"model": {"variant": "graph_efm", "d_z": 4}})");
  EXPECT_EQ(c.graph.kind, mesh::Kind::hierarchical);
  EXPECT_EQ(c.stages.size(), objectives::default_graph_efm_schedule(false).size());
  EXPECT_EQ(c.stages[0].mode, objectives::StageMode::autoencoder);
  const auto again = pipeline::run_config_from_json(pipeline::run_config_to_json(c).dump());
  EXPECT_EQ(pipeline::run_config_to_json(again), pipeline::run_config_to_json(c));
  EXPECT_EQ(again.model, c.model);
}

TEST(RunConfig, StagesAreValidatedAgainstTheVariant) {
  EXPECT_THROW(pipeline::run_config_from_json(
                   R"({"model": {"variant": "graphfm"}, "training": {"stages": [{"mode": "crps_finetune", "lambda_crps": 1}]}})"),
               std::invalid_argument);
  EXPECT_THROW(pipeline::run_config_from_json(
                   R"({"model": {"variant": "graph_efm"}, "training": {"stages": [{"mode": "mse"}]}})"),
               std::invalid_argument);
  EXPECT_THROW(pipeline::run_config_from_json(
                   R"({"model": {"variant": "graphfm"}, "training": {"stages": [{"mode": "nll"}]}})"),
               std::invalid_argument);
  EXPECT_NO_THROW(pipeline::run_config_from_json(
      R"({"model": {"variant": "graphfm", "output_sigma": true}, "training": {"stages": [{"mode": "nll"}]}})"));
}

TEST(RunConfig, RejectsTyposAndMismatchedGraphs) {
  EXPECT_THROW(pipeline::run_config_from_json(R"({"model": {"variant": "graphfm", "dz": 4}})"),
               std::invalid_argument);
  EXPECT_THROW(pipeline::run_config_from_json(R"({"model": {"variant": "graphfm"}, "graph": {"kind": "multiscale"}})"),
               std::invalid_argument);
  EXPECT_THROW(pipeline::run_config_from_json(R"({"model": {"variant": "nope"}})"), std::invalid_argument);
  EXPECT_THROW(pipeline::run_config_from_json("{not json"), std::invalid_argument);
  EXPECT_THROW(pipeline::run_config_from_json(R"({"model": {"variant": "graphfm"}, "evaluation": {"split": "dev"}})"),
               std::invalid_argument);
}

TEST(RunConfig, ShippedConfigsGiveFiniteLossesOnEveryStage) {
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(GEFM_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json") continue;
    SCOPED_TRACE(entry.path().filename().string());
    const auto c = pipeline::run_config_from_json(pipeline::read_file(entry.path().string()));
    auto o = small_global(20);
    if (c.graph.geometry == mesh::Geometry::planar) {
      o.planar = true;
      o.rows = o.cols = 45;
      o.boundary_width = c.boundary_width;
    }
    const auto d = normalized(o);
    const auto exp = experiment(c, d);
    const auto params = exp.model->init_params(c.init, c.seed);
    for (const auto& stage : c.stages) {
      const auto first = pipeline::source_windows(d, pipeline::effective_window_length(c)).front() + 2;
      EXPECT_TRUE(std::isfinite(pipeline::window_loss(exp, d, params, stage, first, 0).item()))
          << objectives::stage_mode_name(stage.mode);
    }
    ++seen;
  }
  EXPECT_GE(seen, 5u);
}

// ---------------------------------------------------------------- training

TEST(Training, ZeroEpochScheduleReturnsTheInitialization) {
  const auto d = normalized(small_global(30));
  auto c = toy_run(models::Variant::graphfm);
  c.stages = {{objectives::StageMode::mse, 0, 1e-3, 1, 0.0, 0.0}};
  const auto exp = experiment(c, d);
  const auto dir = scratch("zero");
  const auto r = pipeline::train(exp, d, dir);
  EXPECT_EQ(num::ParamStore::max_abs_diff(r.params, exp.model->init_params(c.init, c.seed)), 0.0);
  const auto ck = models::load_checkpoint(dir + "/final.ckpt");
  EXPECT_EQ(num::ParamStore::max_abs_diff(ck.params, r.initial), 0.0);
  EXPECT_TRUE(r.log.empty());
}

TEST(Training, SourceWindowsTileTheTrainingSplit) {
  const auto d = normalized(small_global(50));  // train split [0, 30)
  const auto w = pipeline::source_windows(d, 4);
  ASSERT_EQ(w.size(), 7u);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(w[i], 4 * i);
}

TEST(Training, SameSeedGivesIdenticalCheckpoints) {
  const auto d = normalized(small_global(30));
  auto c = toy_run(models::Variant::graph_efm);
  c.stages = {{objectives::StageMode::autoencoder, 1, 1e-3, 1, 0.0, 0.0},
              {objectives::StageMode::crps_finetune, 1, 1e-3, 2, 0.1, 1.0}};
  const auto exp = experiment(c, d);
  const auto a = scratch("det_a"), b = scratch("det_b");
  pipeline::train(exp, d, a);
  pipeline::train(exp, d, b);
  for (const char* f : {"stage_1.ckpt", "stage_2.ckpt", "final.ckpt", "train_log.csv", "run_config.json"}) {
    EXPECT_EQ(pipeline::read_file(a + "/" + f), pipeline::read_file(b + "/" + f)) << f;
  }
}

TEST(Training, OverfitsTwoWindows) {
  // 10 steps: training split [0, 6) holds exactly two 3-step source windows.
  const auto d = normalized(small_global(10));
  auto c = toy_run(models::Variant::graphfm);
  c.model.d_z = 16;
  c.window_length = 3;
  c.stages = {{objectives::StageMode::mse, 200, 3e-3, 1, 0.0, 0.0}};
  const auto exp = experiment(c, d);
  ASSERT_EQ(pipeline::source_windows(d, 3).size(), 2u);
  const auto r = pipeline::train(exp, d);
  ASSERT_EQ(r.log.size(), 200u);
  EXPECT_EQ(r.log.front().windows, 2u);
  EXPECT_LT(r.log.back().loss, 0.1 * r.log.front().loss);
}

TEST(Training, DivergenceNamesStageAndStep) {
  auto d = normalized(small_global(30));
  auto v = d.fields[4].to_vector();
  v[0] = std::numeric_limits<double>::infinity();
  d.fields[4] = Tensor::from(d.fields[4].shape(), v);
  auto c = toy_run(models::Variant::graphfm);
  c.stages = {{objectives::StageMode::mse, 1, 1e-3, 1, 0.0, 0.0}};
  const auto exp = experiment(c, d);
  try {
    pipeline::train(exp, d);
    FAIL() << "expected NumericalError";
  } catch (const num::NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("stage 1 (mse), epoch 1, step"), std::string::npos) << e.what();
  }
}

TEST(Training, ExperimentChecksDatasetLayout) {
  auto raw = pipeline::synth_data(small_global(20));
  const auto c = toy_run(models::Variant::graphfm);
  EXPECT_THROW(experiment(c, raw), std::invalid_argument);  // not normalized
  pipeline::normalize_dataset(raw);
  auto other = c;
  other.graph.geometry = mesh::Geometry::planar;
  EXPECT_THROW(experiment(other, raw), std::invalid_argument);
  const auto exp = experiment(c, raw);
  EXPECT_EQ(exp.config.model.state_dim, 2u);
  EXPECT_EQ(exp.config.model.forcing_dim, raw.window_width());
}

// ------------------------------------------------------- LAM boundary runs

TEST(LimitedArea, ForecastBoundaryEqualsTruthExactly) {
  auto o = small_global(30);
  o.planar = true;
  o.rows = o.cols = 12;
  o.boundary_width = 2;
  const auto d = normalized(o);
  auto c = toy_run(models::Variant::graph_efm);
  c.graph.geometry = mesh::Geometry::planar;
  const auto exp = experiment(c, d);
  ASSERT_TRUE(exp.limited_area());
  const auto params = exp.model->init_params(models::InitMode::random, 3);
  const auto fc = pipeline::model_forecaster(exp, d, params, 3, 2);
  const std::size_t t0 = 20;
  const auto ens = fc(t0, 3, 9);
  for (const auto& member : ens)
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t a = 0; a < d.nodes(); ++a)
        for (std::size_t j = 0; j < d.state_dim(); ++j) {
          if (exp.mask.frame[a] > 0) {
            EXPECT_EQ(member[k].at(a, j), d.fields[t0 + 1 + k].at(a, j));
          }
        }
  bool interior_differs = false;
  for (std::size_t a = 0; a < d.nodes(); ++a)
    if (exp.mask.interior[a] > 0 && ens[0][0].at(a, 0) != d.fields[t0 + 1].at(a, 0)) interior_differs = true;
  EXPECT_TRUE(interior_differs);
  for (std::size_t a = 0; a < d.nodes(); ++a) EXPECT_EQ(exp.weights.area[a] == 0.0, exp.mask.frame[a] > 0);
}

// --------------------------------------------------------------- evaluation

TEST(Evaluation, EligibleInitsMatchBruteForce) {
  const auto d = normalized(small_global(40));  // test split [32, 40)
  for (std::size_t leads : {1u, 3u}) {
    for (std::size_t stride : {1u, 2u}) {
      std::vector<std::size_t> expected;
      const auto& r = d.splits.test;
      std::size_t count = 0;
      for (std::size_t t0 = 0; t0 < d.steps(); ++t0) {
        const bool ok = t0 >= r.begin + 1 && t0 + leads <= r.end - 1 && t0 + leads + 1 <= d.steps() - 1;
        if (ok) {
          if (count % stride == 0) expected.push_back(t0);
          ++count;
        }
      }
      EXPECT_EQ(pipeline::eligible_inits(d, r, leads, stride), expected) << leads << " " << stride;
    }
  }
}

TEST(Evaluation, PerfectForecastScoresZero) {
  const auto d = normalized(small_global(60));
  const std::size_t leads = 3;
  const pipeline::Forecaster oracle = [&](std::size_t t0, std::size_t k, std::uint64_t) {
    metrics::Sequence s;
    for (std::size_t t = 1; t <= leads; ++t) s.push_back(d.fields[t0 + t]);
    return metrics::EnsembleForecast(k, s);
  };
  for (bool prob : {false, true}) {
    pipeline::EvalOptions o;
    o.probabilistic = prob;
    o.ensemble = 4;
    o.lead_times = leads;
    const auto r = pipeline::evaluate(oracle, d, metrics::area_weights(d.grid), o);
    for (const auto& row : r.rows) {
      if (row.metric == "rmse" || row.metric == "crps" || row.metric == "mae" || row.metric == "spread") {
        EXPECT_EQ(row.value, 0.0) << row.metric;
      }
    }
  }
}

TEST(Evaluation, SingleMemberCrpsEqualsMae) {
  const auto d = normalized(small_global(60));
  auto c = toy_run(models::Variant::graph_efm);
  const auto exp = experiment(c, d);
  const auto params = exp.model->init_params(models::InitMode::random, 8);
  pipeline::EvalOptions o;
  o.ensemble = 1;
  o.lead_times = 2;
  o.init_stride = 3;
  const auto fc = pipeline::model_forecaster(exp, d, params, o.lead_times, 1);
  const auto r = pipeline::evaluate(fc, d, exp.metric_weights, o);

  std::vector<metrics::Sequence> f, y;
  for (auto t0 : r.inits) {
    metrics::Sequence fs, ys;
    const auto members = fc(t0, 1, pipeline::forecast_seed(o.seed, t0, 1));
    for (const auto& x : members.front()) fs.push_back(pipeline::denormalize(x, d.norm));
    for (std::size_t t = 1; t <= 2; ++t) ys.push_back(pipeline::denormalize(d.fields[t0 + t], d.norm));
    f.push_back(fs);
    y.push_back(ys);
  }
  const auto mae = metrics::mae(f, y, exp.metric_weights);
  std::size_t checked = 0;
  for (const auto& row : r.rows) {
    if (row.metric != "crps") continue;
    const auto j = static_cast<std::size_t>(std::find(d.variables.begin(), d.variables.end(), row.variable) -
                                            d.variables.begin());
    EXPECT_EQ(row.value, mae[row.lead_time_steps - 1][j]);
    EXPECT_GT(row.value, 0.0);
    ++checked;
  }
  EXPECT_EQ(checked, 4u);
}

TEST(Evaluation, SweepModes) {
  const auto d = normalized(small_global(60));
  auto c = toy_run(models::Variant::graph_efm);
  const auto exp = experiment(c, d);
  const auto params = exp.model->init_params(models::InitMode::random, 8);
  pipeline::EvalOptions o;
  o.model_label = "efm";
  o.ensemble = 4;
  o.lead_times = 2;
  o.init_stride = 4;
  o.sweep_sizes = {2, 4};
  const auto fc = pipeline::model_forecaster(exp, d, params, o.lead_times, 1);

  auto rows_for = [](const pipeline::EvalResult& r, const std::string& label, std::size_t k) {
    std::vector<metrics::MetricRow> out;
    for (const auto& row : r.rows)
      if (row.model == label && row.members == k) out.push_back(row);
    return out;
  };
  const auto resample = pipeline::evaluate(fc, d, exp.metric_weights, o);
  o.sweep_mode = pipeline::SweepMode::prefix;
  const auto prefix = pipeline::evaluate(fc, d, exp.metric_weights, o);

  // Main rows plus one block per sweep size; the main ensemble reappears
  // unchanged as the resampled K = 4 block.
  const auto main = rows_for(resample, "efm", 4);
  ASSERT_EQ(main.size(), 2 * 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(main[i].value, main[16 + i].value);
  EXPECT_EQ(rows_for(prefix, "efm[prefix]", 2).size(), 16u);
  EXPECT_TRUE(rows_for(resample, "efm[prefix]", 2).empty());

  // Prefix rows are the first members of the main ensembles.
  std::vector<metrics::EnsembleForecast> ens;
  std::vector<metrics::Sequence> truth;
  for (auto t0 : prefix.inits) {
    metrics::EnsembleForecast e;
    for (const auto& m : fc(t0, 4, pipeline::forecast_seed(o.seed, t0, 4))) {
      metrics::Sequence s;
      for (const auto& x : m) s.push_back(pipeline::denormalize(x, d.norm));
      e.push_back(s);
    }
    ens.push_back(metrics::EnsembleForecast(e.begin(), e.begin() + 2));
    metrics::Sequence y;
    for (std::size_t t = 1; t <= 2; ++t) y.push_back(pipeline::denormalize(d.fields[t0 + t], d.norm));
    truth.push_back(y);
  }
  const auto crps2 = metrics::ensemble_crps(ens, truth, exp.metric_weights);
  for (const auto& row : rows_for(prefix, "efm[prefix]", 2)) {
    if (row.metric != "crps") continue;
    const std::size_t j = row.variable == d.variables[0] ? 0 : 1;
    EXPECT_EQ(row.value, crps2[row.lead_time_steps - 1][j]);
  }
  // The resampled K = 2 ensemble uses its own seeds.
  const auto re2 = rows_for(resample, "efm", 2);
  ASSERT_EQ(re2.size(), 16u);
  bool differs = false;
  for (std::size_t i = 0; i < 16; ++i) differs = differs || re2[i].value != rows_for(prefix, "efm[prefix]", 2)[i].value;
  EXPECT_TRUE(differs);
}

TEST(Evaluation, PlotsAreWritten) {
  const auto dir = scratch("plots");
  std::vector<metrics::MetricRow> rows{{"m", "theta", 1, "rmse", 0.5, 3, 1}, {"m", "theta", 2, "rmse", 0.7, 3, 1},
                                       {"m", "theta", 1, "spskr", std::nan(""), 3, 2}};
  const auto written = pipeline::write_plots(rows, dir);
  ASSERT_EQ(written.size(), 2u);
  const auto svg = pipeline::read_file(dir + "/rmse.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("<path"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Evaluation, GraphHashMismatchIsRejected) {
  const auto d = normalized(small_global(30));
  const auto c = toy_run(models::Variant::graphfm);
  const auto exp = experiment(c, d);
  auto ck = pipeline::make_checkpoint(exp, d, exp.model->init_params(c.init, 1), 0);
  EXPECT_NO_THROW(pipeline::experiment_from_checkpoint(ck, d));
  ck.graph_hash ^= 1;
  EXPECT_THROW(pipeline::experiment_from_checkpoint(ck, d), std::invalid_argument);
}

}  // namespace
