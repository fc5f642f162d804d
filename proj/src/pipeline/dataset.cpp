#include "gefm/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "gefm/meshgraph/geometry.hpp"
#include "gefm/numcore/ops.hpp"
#include "gefm/numcore/rng.hpp"
#include "gefm/pipeline/io.hpp"

namespace gefm::pipeline {

using num::Tensor;
using json = nlohmann::json;

const TimeRange& Splits::get(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train, val or test)");
}

void Dataset::validate() const {
  const auto n = nodes();
  if (n == 0) throw std::invalid_argument("dataset: empty grid");
  if (fields.size() != forcing.size()) throw num::ShapeError("dataset: forcing and fields differ in length");
  for (std::size_t t = 0; t < fields.size(); ++t) {
    if (fields[t].rows() != n || fields[t].cols() != state_dim()) {
      throw num::ShapeError("dataset: field shape differs at step " + std::to_string(t));
    }
    if (forcing[t].rows() != n || forcing[t].cols() != dynamic_forcing_dim()) {
      throw num::ShapeError("dataset: forcing shape differs at step " + std::to_string(t));
    }
  }
  if (static_dim() > 0 && (static_forcing.rows() != n || static_forcing.cols() != static_dim())) {
    throw num::ShapeError("dataset: static forcing shape differs");
  }
  if (units.size() != variables.size()) throw num::ShapeError("dataset: one unit per variable expected");
  for (const auto* r : {&splits.train, &splits.val, &splits.test}) {
    if (r->begin > r->end || r->end > steps()) throw std::invalid_argument("dataset: split range out of bounds");
  }
  if (!norm.mean.empty() && (norm.mean.size() != state_dim() || norm.std.size() != state_dim())) {
    throw num::ShapeError("dataset: normalization stats do not match the variables");
  }
}

Splits make_splits(std::size_t steps, double train_fraction, double val_fraction) {
  if (!(train_fraction > 0) || !(val_fraction >= 0) || train_fraction + val_fraction >= 1.0) {
    throw std::invalid_argument("split fractions must satisfy train > 0, val >= 0, train + val < 1");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(steps)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(steps)));
  Splits s;
  s.train = {0, n_train};
  s.val = {n_train, n_train + n_val};
  s.test = {n_train + n_val, steps};
  return s;
}

namespace {

// Lattice helpers on (row, col) indices. Columns wrap on the sphere; every
// other edge is a reflecting wall.
struct Lattice {
  std::size_t rows, cols;
  bool periodic;

  std::size_t id(std::size_t r, std::size_t c) const { return r * cols + c; }

  double sample(const std::vector<double>& x, double r, double c) const {
    r = std::clamp(r, 0.0, static_cast<double>(rows - 1));
    if (periodic) {
      c = std::fmod(c, static_cast<double>(cols));
      if (c < 0) c += static_cast<double>(cols);
    } else {
      c = std::clamp(c, 0.0, static_cast<double>(cols - 1));
    }
    const auto r0 = static_cast<std::size_t>(std::floor(r));
    const auto c0 = static_cast<std::size_t>(std::floor(c)) % cols;
    const auto r1 = std::min(r0 + 1, rows - 1);
    const auto c1 = periodic ? (c0 + 1) % cols : std::min(c0 + 1, cols - 1);
    const double fr = r - static_cast<double>(r0), fc = c - std::floor(c);
    return (1 - fr) * ((1 - fc) * x[id(r0, c0)] + fc * x[id(r0, c1)]) +
           fr * ((1 - fc) * x[id(r1, c0)] + fc * x[id(r1, c1)]);
  }

  // x + kappa * (graph Laplacian of the 4-neighbour lattice) x
  std::vector<double> diffuse(const std::vector<double>& x, double kappa) const {
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double xi = x[id(r, c)];
        double lap = 0.0;
        if (r > 0) lap += x[id(r - 1, c)] - xi;
        if (r + 1 < rows) lap += x[id(r + 1, c)] - xi;
        if (periodic) {
          if (cols > 1) {
            lap += x[id(r, (c + cols - 1) % cols)] - xi;
            if (cols > 2) lap += x[id(r, (c + 1) % cols)] - xi;
          }
        } else {
          if (c > 0) lap += x[id(r, c - 1)] - xi;
          if (c + 1 < cols) lap += x[id(r, c + 1)] - xi;
        }
        out[id(r, c)] = xi + kappa * lap;
      }
    return out;
  }
};

std::vector<double> gaussian_bumps(const Lattice& lat, num::RngStream& rng, std::size_t count) {
  std::vector<double> out(lat.rows * lat.cols, 0.0);
  for (std::size_t b = 0; b < count; ++b) {
    const double r0 = rng.uniform() * static_cast<double>(lat.rows);
    const double c0 = rng.uniform() * static_cast<double>(lat.cols);
    const double width = 0.15 * static_cast<double>(std::max(lat.rows, lat.cols)) * (0.5 + rng.uniform());
    const double amp = rng.normal();
    for (std::size_t r = 0; r < lat.rows; ++r)
      for (std::size_t c = 0; c < lat.cols; ++c) {
        double dc = std::fabs(static_cast<double>(c) - c0);
        if (lat.periodic) dc = std::min(dc, static_cast<double>(lat.cols) - dc);
        const double dr = static_cast<double>(r) - r0;
        out[lat.id(r, c)] += amp * std::exp(-(dr * dr + dc * dc) / (2 * width * width));
      }
  }
  return out;
}

}  // namespace

Dataset synth_data(const SynthOptions& o) {
  if (o.rows < 8 || o.cols < 8) throw std::invalid_argument("synth_data: grid must be at least 8 x 8");
  if (o.steps < 4) throw std::invalid_argument("synth_data: need at least 4 time steps");
  if (o.state_dim == 0) throw std::invalid_argument("synth_data: state_dim must be positive");
  if (!(o.diffusion >= 0 && o.diffusion <= 0.25)) throw std::invalid_argument("synth_data: diffusion must be in [0, 0.25]");
  if (o.day_length < 2) throw std::invalid_argument("synth_data: day_length must be at least 2");
  if (2 * o.boundary_width >= std::min(o.rows, o.cols) && o.boundary_width > 0) {
    throw std::invalid_argument("synth_data: boundary frame covers the whole grid");
  }

  Dataset d;
  d.grid = o.planar ? mesh::GridSpec::planar(o.rows, o.cols) : mesh::GridSpec::latlon_cell_centred(o.rows, o.cols);
  d.seed = o.seed;
  d.boundary_width = o.boundary_width;
  const Lattice lat{o.rows, o.cols, !o.planar};
  const std::size_t n = o.rows * o.cols, dx = o.state_dim;

  const std::vector<std::string> base_names{"theta", "q"}, base_units{"K", "g/kg"};
  for (std::size_t j = 0; j < dx; ++j) {
    d.variables.push_back(j < base_names.size() ? base_names[j] : "c" + std::to_string(j));
    d.units.push_back(j < base_units.size() ? base_units[j] : "1");
  }
  d.forcing_names = {"sin_time_of_day", "cos_time_of_day", "insolation"};
  d.static_names = {"orography"};
  if (o.boundary_width > 0) d.static_names.push_back("boundary");

  num::RngStream oro_rng({o.seed, num::Purpose::data_noise, 2000, 0});
  auto orography = gaussian_bumps(lat, oro_rng, 5);
  {
    double peak = 0.0;
    for (double v : orography) peak = std::max(peak, std::fabs(v));
    for (auto& v : orography) v /= peak > 0 ? peak : 1.0;
  }
  std::vector<double> statics;
  const auto mask = make_boundary_mask(o.rows, o.cols, o.boundary_width);
  for (std::size_t a = 0; a < n; ++a) {
    statics.push_back(orography[a]);
    if (o.boundary_width > 0) statics.push_back(mask.frame[a]);
  }
  d.static_forcing = Tensor::from({n, d.static_dim()}, statics);

  const double two_pi = 2.0 * mesh::kPi;
  auto insolation = [&](std::size_t t, std::size_t c) {
    const double phase = two_pi * static_cast<double>(t) / static_cast<double>(o.day_length);
    return std::max(0.0, std::cos(phase + two_pi * static_cast<double>(c) / static_cast<double>(o.cols)));
  };
  auto latitude_factor = [&](std::size_t r) {
    if (o.planar) return 1.0;
    return std::cos(mesh::deg2rad(d.grid.lat0 + d.grid.dlat * static_cast<double>(r)));
  };

  // Equilibrium of variable j: a mix of daylight heating and orography.
  auto equilibrium = [&](std::size_t j, std::size_t t, std::size_t r, std::size_t c) {
    const double heat = 1.5 * insolation(t, c) * latitude_factor(r);
    const double oro = orography[lat.id(r, c)];
    switch (j % 3) {
      case 0: return heat - 0.5 * oro;
      case 1: return 0.8 * oro + 0.3 * heat;
      default: return 0.5 * (heat + oro);
    }
  };

  // Velocity in cells per step at lattice point (r, c).
  const double omega = o.diffusion_only ? 0.0 : o.advection;
  const double rc = 0.5 * static_cast<double>(o.rows - 1), cc = 0.5 * static_cast<double>(o.cols - 1);
  auto velocity = [&](double r, double c) -> std::pair<double, double> {
    if (o.planar) return {omega * (c - cc), -omega * (r - rc)};
    const double zonal = omega * static_cast<double>(o.cols) / two_pi * latitude_factor(static_cast<std::size_t>(r));
    const double meridional = 0.25 * omega * static_cast<double>(o.rows) / two_pi *
                              std::sin(two_pi * c / static_cast<double>(o.cols));
    return {meridional, zonal};
  };

  std::vector<std::vector<double>> x(dx);
  for (std::size_t j = 0; j < dx; ++j) {
    num::RngStream rng({o.seed, num::Purpose::data_noise, 1000 + j, 0});
    x[j] = gaussian_bumps(lat, rng, 6);
  }

  const double relax = o.diffusion_only ? 0.0 : o.relaxation;
  const double noise = o.diffusion_only ? 0.0 : o.noise;
  for (std::size_t t = 0; t < o.steps; ++t) {
    if (t > 0) {
      for (std::size_t j = 0; j < dx; ++j) {
        std::vector<double> adv(n);
        for (std::size_t r = 0; r < o.rows; ++r)
          for (std::size_t c = 0; c < o.cols; ++c) {
            const auto [vr, vc] = velocity(static_cast<double>(r), static_cast<double>(c));
            adv[lat.id(r, c)] =
                omega == 0.0 ? x[j][lat.id(r, c)] : lat.sample(x[j], static_cast<double>(r) - vr, static_cast<double>(c) - vc);
          }
        auto next = lat.diffuse(adv, o.diffusion);
        num::RngStream rng({o.seed, num::Purpose::data_noise, j, t});
        for (std::size_t r = 0; r < o.rows; ++r)
          for (std::size_t c = 0; c < o.cols; ++c) {
            auto& v = next[lat.id(r, c)];
            v += relax * (equilibrium(j, t, r, c) - v);
            if (noise > 0) v += noise * (0.5 + 0.5 * std::fabs(v)) * rng.normal();
          }
        x[j] = std::move(next);
      }
    }
    std::vector<double> field(n * dx), forcing(n * 3);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t j = 0; j < dx; ++j) field[a * dx + j] = x[j][a];
    const double phase = two_pi * static_cast<double>(t) / static_cast<double>(o.day_length);
    for (std::size_t r = 0; r < o.rows; ++r)
      for (std::size_t c = 0; c < o.cols; ++c) {
        const auto a = lat.id(r, c);
        forcing[a * 3 + 0] = std::sin(phase);
        forcing[a * 3 + 1] = std::cos(phase);
        forcing[a * 3 + 2] = insolation(t, c) * latitude_factor(r);
      }
    d.fields.push_back(Tensor::from({n, dx}, std::move(field)));
    d.forcing.push_back(Tensor::from({n, 3}, std::move(forcing)));
  }
  d.splits = make_splits(o.steps, o.train_fraction, o.val_fraction);
  d.validate();
  return d;
}

NormStats compute_norm_stats(const Dataset& data) {
  const auto& tr = data.splits.train;
  if (tr.size() == 0) throw std::invalid_argument("normalization needs a non-empty training split");
  const auto dx = data.state_dim(), n = data.nodes();
  NormStats s{std::vector<double>(dx, 0.0), std::vector<double>(dx, 0.0)};
  const double count = static_cast<double>(tr.size() * n);
  for (std::size_t t = tr.begin; t < tr.end; ++t) {
    const auto v = data.fields[t].data();
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t j = 0; j < dx; ++j) s.mean[j] += v[a * dx + j];
  }
  for (auto& m : s.mean) m /= count;
  for (std::size_t t = tr.begin; t < tr.end; ++t) {
    const auto v = data.fields[t].data();
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t j = 0; j < dx; ++j) {
        const double e = v[a * dx + j] - s.mean[j];
        s.std[j] += e * e;
      }
  }
  for (auto& sd : s.std) {
    sd = std::sqrt(sd / count);
    if (!(sd > 0)) sd = 1.0;
  }
  return s;
}

Tensor normalize(const Tensor& x, const NormStats& stats) {
  const auto dx = x.cols();
  if (stats.mean.size() != dx) throw num::ShapeError("normalize: statistics do not match the variables");
  auto v = x.to_vector();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - stats.mean[i % dx]) / stats.std[i % dx];
  return Tensor::from(x.shape(), std::move(v));
}

Tensor denormalize(const Tensor& x, const NormStats& stats) {
  const auto dx = x.cols();
  if (stats.mean.size() != dx) throw num::ShapeError("denormalize: statistics do not match the variables");
  auto v = x.to_vector();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] * stats.std[i % dx] + stats.mean[i % dx];
  return Tensor::from(x.shape(), std::move(v));
}

void normalize_dataset(Dataset& data) {
  if (data.normalized) throw std::invalid_argument("dataset is already normalized");
  data.norm = compute_norm_stats(data);
  for (auto& f : data.fields) f = normalize(f, data.norm);
  data.normalized = true;
}

Tensor window_forcing(const Dataset& data, std::size_t t) {
  if (t == 0 || t + 1 >= data.steps()) {
    throw std::out_of_range("window_forcing: t = " + std::to_string(t) + " needs steps t-1 and t+1 within [0, " +
                            std::to_string(data.steps()) + ")");
  }
  if (data.static_dim() == 0) return num::concat({data.forcing[t - 1], data.forcing[t], data.forcing[t + 1]});
  return num::concat({data.forcing[t - 1], data.forcing[t], data.forcing[t + 1], data.static_forcing});
}

double spatial_variance(const Dataset& data, std::size_t t, std::size_t j) {
  const auto& f = data.fields.at(t);
  const auto n = f.rows();
  double mean = 0.0;
  for (std::size_t a = 0; a < n; ++a) mean += f.at(a, j);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t a = 0; a < n; ++a) var += (f.at(a, j) - mean) * (f.at(a, j) - mean);
  return var / static_cast<double>(n);
}

namespace {

std::string stem(const std::string& path) {
  for (const char* ext : {".json", ".bin"}) {
    const std::string e(ext);
    if (path.size() > e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0) {
      return path.substr(0, path.size() - e.size());
    }
  }
  return path;
}

json range_json(const TimeRange& r) { return json::array({r.begin, r.end}); }
TimeRange range_from(const json& j) { return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()}; }

}  // namespace

std::string dataset_bin_path(const std::string& path) { return stem(path) + ".bin"; }
std::string dataset_json_path(const std::string& path) { return stem(path) + ".json"; }

void save_dataset(const Dataset& data, const std::string& path) {
  data.validate();
  std::string payload;
  payload.reserve(8 * data.steps() * data.nodes() * (data.state_dim() + data.dynamic_forcing_dim()));
  for (const auto& f : data.fields)
    for (double v : f.data()) write_f64_le(payload, v);
  for (const auto& f : data.forcing)
    for (double v : f.data()) write_f64_le(payload, v);
  if (data.static_dim() > 0)
    for (double v : data.static_forcing.data()) write_f64_le(payload, v);

  json j;
  j["format"] = "gefm-dataset";
  j["version"] = 1;
  j["grid"] = grid_to_json(data.grid);
  j["dims"] = {{"steps", data.steps()},
               {"nodes", data.nodes()},
               {"state_dim", data.state_dim()},
               {"forcing_dim", data.dynamic_forcing_dim()},
               {"static_dim", data.static_dim()}};
  j["variables"] = data.variables;
  j["units"] = data.units;
  j["forcing_names"] = data.forcing_names;
  j["static_names"] = data.static_names;
  j["splits"] = {{"train", range_json(data.splits.train)},
                 {"val", range_json(data.splits.val)},
                 {"test", range_json(data.splits.test)}};
  j["normalized"] = data.normalized;
  j["normalization"] = {{"mean", data.norm.mean}, {"std", data.norm.std}};
  j["boundary_width"] = data.boundary_width;
  j["seed"] = data.seed;
  j["payload_bytes"] = payload.size();
  j["payload_digest"] = hex_digest(payload);

  atomic_write(dataset_bin_path(path), payload);
  atomic_write(dataset_json_path(path), j.dump(2) + "\n");
}

Dataset load_dataset(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(dataset_json_path(path)));
  } catch (const json::exception& e) {
    throw std::invalid_argument("dataset sidecar '" + dataset_json_path(path) + "': " + e.what());
  }
  Dataset d;
  std::size_t steps = 0, nodes = 0, dx = 0, df = 0, ds = 0;
  try {
    if (j.at("format") != "gefm-dataset") throw std::invalid_argument("not a dataset sidecar");
    if (j.at("version").get<int>() != 1) throw std::invalid_argument("unsupported dataset version");
    d.grid = grid_from_json(j.at("grid"));
    const auto& dims = j.at("dims");
    steps = dims.at("steps").get<std::size_t>();
    nodes = dims.at("nodes").get<std::size_t>();
    dx = dims.at("state_dim").get<std::size_t>();
    df = dims.at("forcing_dim").get<std::size_t>();
    ds = dims.at("static_dim").get<std::size_t>();
    d.variables = j.at("variables").get<std::vector<std::string>>();
    d.units = j.at("units").get<std::vector<std::string>>();
    d.forcing_names = j.at("forcing_names").get<std::vector<std::string>>();
    d.static_names = j.at("static_names").get<std::vector<std::string>>();
    d.splits.train = range_from(j.at("splits").at("train"));
    d.splits.val = range_from(j.at("splits").at("val"));
    d.splits.test = range_from(j.at("splits").at("test"));
    d.normalized = j.at("normalized").get<bool>();
    d.norm.mean = j.at("normalization").at("mean").get<std::vector<double>>();
    d.norm.std = j.at("normalization").at("std").get<std::vector<double>>();
    d.boundary_width = j.value("boundary_width", std::size_t{0});
    d.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw std::invalid_argument("dataset sidecar '" + dataset_json_path(path) + "': " + e.what());
  }
  if (nodes != d.grid.size() || dx != d.variables.size() || df != d.forcing_names.size() ||
      ds != d.static_names.size()) {
    throw std::invalid_argument("dataset sidecar: dimensions disagree with the names or grid");
  }

  const auto payload = read_file(dataset_bin_path(path));
  const std::size_t expected = 8 * (steps * nodes * (dx + df) + nodes * ds);
  if (payload.size() != expected) {
    throw std::invalid_argument("dataset payload has " + std::to_string(payload.size()) + " bytes, expected " +
                                std::to_string(expected));
  }
  std::size_t off = 0;
  auto take = [&](std::size_t count) {
    std::vector<double> v(count);
    for (auto& x : v) {
      x = read_f64_le(payload, off);
      off += 8;
    }
    return v;
  };
  for (std::size_t t = 0; t < steps; ++t) d.fields.push_back(Tensor::from({nodes, dx}, take(nodes * dx)));
  for (std::size_t t = 0; t < steps; ++t) d.forcing.push_back(Tensor::from({nodes, df}, take(nodes * df)));
  if (ds > 0) d.static_forcing = Tensor::from({nodes, ds}, take(nodes * ds));
  d.validate();
  return d;
}

std::size_t BoundaryMask::frame_count() const {
  std::size_t c = 0;
  for (double v : frame) c += v > 0 ? 1 : 0;
  return c;
}

BoundaryMask make_boundary_mask(std::size_t rows, std::size_t cols, std::size_t width) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("boundary mask: empty grid");
  BoundaryMask m{rows, cols, width, std::vector<double>(rows * cols, 0.0), std::vector<double>(rows * cols, 1.0)};
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const bool on_frame = r < width || c < width || r + width >= rows || c + width >= cols;
      if (on_frame) {
        m.frame[r * cols + c] = 1.0;
        m.interior[r * cols + c] = 0.0;
      }
    }
  return m;
}

Tensor apply_boundary(const Tensor& prediction, const Tensor& boundary, const BoundaryMask& mask) {
  const auto n = mask.rows * mask.cols;
  if (prediction.rows() != n) {
    throw num::ShapeError("apply_boundary: mask built for " + std::to_string(n) + " nodes, state has " +
                          std::to_string(prediction.rows()));
  }
  if (boundary.shape() != prediction.shape()) throw num::ShapeError("apply_boundary: boundary shape differs");
  if (mask.width == 0) return prediction;
  return num::add(num::scale_rows(prediction, mask.interior), num::scale_rows(boundary, mask.frame));
}

}  // namespace gefm::pipeline
