#include "gefm/pipeline/config.hpp"

#include <set>
#include <stdexcept>

namespace gefm::pipeline {

using json = nlohmann::json;
using objectives::StageMode;

mesh::MeshGraph build_graph(const GraphSpec& spec, const mesh::GridSpec& grid) {
  if (spec.geometry != grid.geometry) {
    throw std::invalid_argument(std::string("graph geometry is ") +
                                (spec.geometry == mesh::Geometry::spherical ? "global" : "lam") +
                                " but the data grid is " +
                                (grid.geometry == mesh::Geometry::spherical ? "global" : "lam"));
  }
  if (spec.geometry == mesh::Geometry::spherical) {
    mesh::GlobalGraphOptions o;
    o.refinements = spec.refinements;
    o.hierarchy_levels = spec.levels;
    return mesh::build_global_graph(spec.kind, grid, o);
  }
  mesh::LamGraphOptions o;
  o.mesh_nx = o.mesh_ny = spec.mesh_n;
  o.hierarchy_levels = spec.levels;
  o.multiscale_levels = spec.multiscale_levels;
  o.extent_padding = spec.extent_padding;
  return mesh::build_lam_graph(spec.kind, grid, o);
}

namespace {

// Rejects keys outside `allowed` so that typos surface as config errors.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const std::string& where, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(field);
  } catch (const json::exception&) {
    throw std::invalid_argument(where + "." + key + " has the wrong type");
  }
}

const char* geometry_word(mesh::Geometry g) { return g == mesh::Geometry::spherical ? "global" : "lam"; }
const char* kind_word(mesh::Kind k) { return k == mesh::Kind::multiscale ? "multiscale" : "hier"; }

const char* init_word(models::InitMode m) {
  switch (m) {
    case models::InitMode::standard: return "standard";
    case models::InitMode::zeros: return "zeros";
    case models::InitMode::random: return "random";
  }
  return "?";
}

}  // namespace

json graph_spec_to_json(const GraphSpec& s) {
  return {{"geometry", geometry_word(s.geometry)}, {"kind", kind_word(s.kind)},
          {"refinements", s.refinements},         {"levels", s.levels},
          {"multiscale_levels", s.multiscale_levels}, {"mesh_n", s.mesh_n},
          {"extent_padding", s.extent_padding}};
}

GraphSpec graph_spec_from_json(const json& j) {
  check_keys(j, "graph", {"geometry", "kind", "refinements", "levels", "multiscale_levels", "mesh_n", "extent_padding"});
  GraphSpec s;
  std::string geometry = "global", kind = "hier";
  read(j, "graph", "geometry", geometry);
  read(j, "graph", "kind", kind);
  if (geometry == "global") {
    s.geometry = mesh::Geometry::spherical;
  } else if (geometry == "lam") {
    s.geometry = mesh::Geometry::planar;
  } else {
    throw std::invalid_argument("graph.geometry must be 'global' or 'lam', got '" + geometry + "'");
  }
  if (kind == "hier" || kind == "hierarchical") {
    s.kind = mesh::Kind::hierarchical;
  } else if (kind == "multiscale") {
    s.kind = mesh::Kind::multiscale;
  } else {
    throw std::invalid_argument("graph.kind must be 'multiscale' or 'hier', got '" + kind + "'");
  }
  read(j, "graph", "refinements", s.refinements);
  read(j, "graph", "levels", s.levels);
  read(j, "graph", "multiscale_levels", s.multiscale_levels);
  read(j, "graph", "mesh_n", s.mesh_n);
  read(j, "graph", "extent_padding", s.extent_padding);
  return s;
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config", {"name", "graph", "model", "init", "training", "boundary_width", "seed", "evaluation",
                           "paths"});
  RunConfig c;
  read(j, "config", "name", c.name);
  read(j, "config", "seed", c.seed);
  read(j, "config", "boundary_width", c.boundary_width);
  if (j.contains("graph")) c.graph = graph_spec_from_json(j.at("graph"));

  if (!j.contains("model")) throw std::invalid_argument("config: missing 'model' section");
  const auto& m = j.at("model");
  check_keys(m, "model", {"variant", "d_z", "processor_steps", "predictor_sweeps", "ms_latent_steps",
                          "ms_predictor_steps", "ms_variational_steps", "output_sigma", "static_prior"});
  std::string variant;
  read(m, "model", "variant", variant);
  if (variant.empty()) throw std::invalid_argument("model.variant is required");
  c.model.variant = models::parse_variant(variant);
  read(m, "model", "d_z", c.model.d_z);
  read(m, "model", "processor_steps", c.model.processor_steps);
  read(m, "model", "predictor_sweeps", c.model.predictor_sweeps);
  read(m, "model", "ms_latent_steps", c.model.ms_latent_steps);
  read(m, "model", "ms_predictor_steps", c.model.ms_predictor_steps);
  read(m, "model", "ms_variational_steps", c.model.ms_variational_steps);
  read(m, "model", "output_sigma", c.model.output_sigma);
  read(m, "model", "static_prior", c.model.static_prior);
  if (!j.contains("graph")) c.graph.kind = models::required_graph_kind(c.model.variant);

  std::string init = "standard";
  read(j, "config", "init", init);
  if (init == "standard") {
    c.init = models::InitMode::standard;
  } else if (init == "zeros") {
    c.init = models::InitMode::zeros;
  } else if (init == "random") {
    c.init = models::InitMode::random;
  } else {
    throw std::invalid_argument("init must be standard, zeros or random, got '" + init + "'");
  }

  const bool lam = c.graph.geometry == mesh::Geometry::planar;
  if (j.contains("training")) {
    const auto& t = j.at("training");
    check_keys(t, "training", {"stages", "weight_decay", "batch_size", "window_length"});
    read(t, "training", "weight_decay", c.weight_decay);
    read(t, "training", "batch_size", c.batch_size);
    read(t, "training", "window_length", c.window_length);
    if (t.contains("stages")) {
      if (!t.at("stages").is_array()) throw std::invalid_argument("training.stages must be an array");
      for (std::size_t i = 0; i < t.at("stages").size(); ++i) {
        const auto& s = t.at("stages").at(i);
        const auto where = "training.stages[" + std::to_string(i) + "]";
        check_keys(s, where, {"mode", "epochs", "learning_rate", "unroll", "lambda_kl", "lambda_crps"});
        objectives::StageConfig st;
        std::string mode;
        read(s, where, "mode", mode);
        if (mode.empty()) throw std::invalid_argument(where + ".mode is required");
        st.mode = objectives::parse_stage_mode(mode);
        st.lambda_kl = st.mode == StageMode::autoencoder || !models::is_probabilistic(c.model.variant)
                           ? 0.0
                           : (lam ? 1.0 : 0.1);
        read(s, where, "epochs", st.epochs);
        read(s, where, "learning_rate", st.learning_rate);
        read(s, where, "unroll", st.unroll);
        read(s, where, "lambda_kl", st.lambda_kl);
        read(s, where, "lambda_crps", st.lambda_crps);
        c.stages.push_back(st);
      }
    }
  }
  if (!j.contains("training") || !j.at("training").contains("stages")) {
    c.stages = models::is_probabilistic(c.model.variant)
                   ? objectives::default_graph_efm_schedule(lam)
                   : objectives::default_deterministic_schedule(c.model.output_sigma);
  }

  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    check_keys(e, "evaluation",
               {"ensemble", "lead_times", "init_stride", "sweep_sizes", "sweep_mode", "seed", "threads", "split"});
    read(e, "evaluation", "ensemble", c.eval.ensemble);
    read(e, "evaluation", "lead_times", c.eval.lead_times);
    read(e, "evaluation", "init_stride", c.eval.init_stride);
    read(e, "evaluation", "sweep_sizes", c.eval.sweep_sizes);
    read(e, "evaluation", "seed", c.eval.seed);
    read(e, "evaluation", "threads", c.eval.threads);
    read(e, "evaluation", "split", c.eval.split);
    std::string mode = "resample";
    read(e, "evaluation", "sweep_mode", mode);
    if (mode == "resample") {
      c.eval.sweep_mode = SweepMode::resample;
    } else if (mode == "prefix") {
      c.eval.sweep_mode = SweepMode::prefix;
    } else {
      throw std::invalid_argument("evaluation.sweep_mode must be resample or prefix, got '" + mode + "'");
    }
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, "paths", {"data", "graph", "out"});
    read(p, "paths", "data", c.data_path);
    read(p, "paths", "graph", c.graph_path);
    read(p, "paths", "out", c.out_dir);
  }
  validate_run_config(c);
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json stages = json::array();
  for (const auto& s : c.stages) {
    stages.push_back({{"mode", objectives::stage_mode_name(s.mode)},
                      {"epochs", s.epochs},
                      {"learning_rate", s.learning_rate},
                      {"unroll", s.unroll},
                      {"lambda_kl", s.lambda_kl},
                      {"lambda_crps", s.lambda_crps}});
  }
  return {{"name", c.name},
          {"graph", graph_spec_to_json(c.graph)},
          {"model",
           {{"variant", models::variant_name(c.model.variant)},
            {"d_z", c.model.d_z},
            {"processor_steps", c.model.processor_steps},
            {"predictor_sweeps", c.model.predictor_sweeps},
            {"ms_latent_steps", c.model.ms_latent_steps},
            {"ms_predictor_steps", c.model.ms_predictor_steps},
            {"ms_variational_steps", c.model.ms_variational_steps},
            {"output_sigma", c.model.output_sigma},
            {"static_prior", c.model.static_prior}}},
          {"init", init_word(c.init)},
          {"training",
           {{"stages", stages},
            {"weight_decay", c.weight_decay},
            {"batch_size", c.batch_size},
            {"window_length", c.window_length}}},
          {"boundary_width", c.boundary_width},
          {"seed", c.seed},
          {"evaluation",
           {{"ensemble", c.eval.ensemble},
            {"lead_times", c.eval.lead_times},
            {"init_stride", c.eval.init_stride},
            {"sweep_sizes", c.eval.sweep_sizes},
            {"sweep_mode", c.eval.sweep_mode == SweepMode::prefix ? "prefix" : "resample"},
            {"seed", c.eval.seed},
            {"threads", c.eval.threads},
            {"split", c.eval.split}}},
          {"paths", {{"data", c.data_path}, {"graph", c.graph_path}, {"out", c.out_dir}}}};
}

void validate_run_config(const RunConfig& c) {
  const auto v = c.model.variant;
  if (c.graph.kind != models::required_graph_kind(v)) {
    throw std::invalid_argument(std::string("variant ") + models::variant_name(v) + " needs a " +
                                kind_word(models::required_graph_kind(v)) + " graph, config has " +
                                kind_word(c.graph.kind));
  }
  if (c.graph.levels == 0) throw std::invalid_argument("graph.levels must be at least 1");
  if (c.model.d_z == 0) throw std::invalid_argument("model.d_z must be positive");
  if (c.batch_size == 0) throw std::invalid_argument("training.batch_size must be positive");
  const bool prob = models::is_probabilistic(v);
  for (std::size_t i = 0; i < c.stages.size(); ++i) {
    const auto& s = c.stages[i];
    objectives::validate_stage(s, i);
    const auto where = "training stage " + std::to_string(i + 1) + " (" + objectives::stage_mode_name(s.mode) + "): ";
    const bool prob_mode = s.mode == StageMode::autoencoder || s.mode == StageMode::variational ||
                           s.mode == StageMode::crps_finetune;
    if (prob_mode && !prob) {
      throw std::invalid_argument(where + "needs a probabilistic variant, got " + models::variant_name(v));
    }
    if (!prob_mode && prob) {
      throw std::invalid_argument(where + "is a deterministic objective but the variant is " + models::variant_name(v));
    }
    if (s.mode == StageMode::nll && !c.model.output_sigma) {
      throw std::invalid_argument(where + "requires model.output_sigma = true");
    }
    if (c.window_length > 0 && c.window_length < s.unroll + 2) {
      throw std::invalid_argument(where + "unroll does not fit in training.window_length");
    }
  }
  if (c.eval.ensemble == 0) throw std::invalid_argument("evaluation.ensemble must be positive");
  if (c.eval.lead_times == 0) throw std::invalid_argument("evaluation.lead_times must be positive");
  if (c.eval.init_stride == 0) throw std::invalid_argument("evaluation.init_stride must be positive");
  for (auto k : c.eval.sweep_sizes) {
    if (k == 0) throw std::invalid_argument("evaluation.sweep_sizes must be positive");
    if (c.eval.sweep_mode == SweepMode::prefix && k > c.eval.ensemble) {
      throw std::invalid_argument("evaluation.sweep_sizes: prefix mode cannot exceed the ensemble size");
    }
  }
  if (c.eval.split != "train" && c.eval.split != "val" && c.eval.split != "test") {
    throw std::invalid_argument("evaluation.split must be train, val or test");
  }
}

}  // namespace gefm::pipeline
