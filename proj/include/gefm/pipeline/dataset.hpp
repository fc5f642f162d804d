#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gefm/meshgraph/grid.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::pipeline {

/// Half-open range of time indices [begin, end).
struct TimeRange {
  std::size_t begin = 0, end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool contains(std::size_t t) const { return t >= begin && t < end; }
  bool operator==(const TimeRange&) const = default;
};

struct Splits {
  TimeRange train, val, test;
  const TimeRange& get(const std::string& name) const;
};

/// Per-variable statistics used to map fields to zero mean and unit variance.
struct NormStats {
  std::vector<double> mean, std;
};

/// Gridded time series. Fields and dynamic forcing hold one [nodes, channels]
/// tensor per time step; static forcing is a single [nodes, channels] tensor.
struct Dataset {
  mesh::GridSpec grid;
  std::vector<num::Tensor> fields;
  std::vector<num::Tensor> forcing;
  num::Tensor static_forcing;
  std::vector<std::string> variables, units, forcing_names, static_names;
  Splits splits;
  NormStats norm;
  bool normalized = false;
  std::size_t boundary_width = 0;
  std::uint64_t seed = 0;

  std::size_t steps() const { return fields.size(); }
  std::size_t nodes() const { return grid.size(); }
  std::size_t state_dim() const { return variables.size(); }
  std::size_t dynamic_forcing_dim() const { return forcing_names.size(); }
  std::size_t static_dim() const { return static_names.size(); }
  /// Width of a windowed forcing row.
  std::size_t window_width() const { return 3 * dynamic_forcing_dim() + static_dim(); }

  /// Throws if tensor shapes, names or splits are inconsistent.
  void validate() const;
};

struct SynthOptions {
  std::size_t rows = 12, cols = 24;
  bool planar = false;  // limited-area square lattice instead of a global lat-lon grid
  std::size_t steps = 200;
  std::uint64_t seed = 0;
  std::size_t state_dim = 2;
  /// Angular speed of the rotational flow in radians per step.
  double advection = 0.15;
  /// Explicit diffusion coefficient (stable for values up to 0.25).
  double diffusion = 0.05;
  /// Relaxation rate towards the forced equilibrium.
  double relaxation = 0.1;
  /// Noise amplitude; scaled per node by the local state.
  double noise = 0.05;
  std::size_t day_length = 8;
  /// Zero advection, relaxation and noise: pure diffusion.
  bool diffusion_only = false;
  std::size_t boundary_width = 0;  // adds a binary boundary indicator static channel when > 0
  double train_fraction = 0.6, val_fraction = 0.2;
};

/// Deterministic toy dynamical system: smooth fields advected by a solid-body
/// rotation, diffused, relaxed towards an orography- and daylight-driven
/// equilibrium, and perturbed by state-dependent noise. Fields are returned
/// unnormalized.
Dataset synth_data(const SynthOptions& options);

/// Time-split contiguous train/val/test ranges.
Splits make_splits(std::size_t steps, double train_fraction, double val_fraction);

/// Per-variable mean and standard deviation over the training range.
NormStats compute_norm_stats(const Dataset& data);
num::Tensor normalize(const num::Tensor& x, const NormStats& stats);
num::Tensor denormalize(const num::Tensor& x, const NormStats& stats);
/// Computes training statistics and normalizes every field in place.
void normalize_dataset(Dataset& data);

/// Dynamic forcing at t-1, t and t+1 followed by the static channels.
num::Tensor window_forcing(const Dataset& data, std::size_t t);

/// Spatial variance of variable j at time t (population variance over nodes).
double spatial_variance(const Dataset& data, std::size_t t, std::size_t j);

/// Paths of the binary payload and the JSON sidecar for a dataset path with
/// or without extension.
std::string dataset_bin_path(const std::string& path);
std::string dataset_json_path(const std::string& path);

/// Little-endian float64 payload (fields, dynamic forcing, static forcing)
/// plus a JSON sidecar with dimensions, names, splits and statistics.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Per-node frame indicator of `width` cells around a rectangular grid.
struct BoundaryMask {
  std::size_t rows = 0, cols = 0, width = 0;
  std::vector<double> frame;     // 1 on the frame
  std::vector<double> interior;  // 1 - frame

  std::size_t frame_count() const;
};

BoundaryMask make_boundary_mask(std::size_t rows, std::size_t cols, std::size_t width);

/// Interior values from `prediction`, frame values from `boundary`. Records
/// gradients through the interior.
num::Tensor apply_boundary(const num::Tensor& prediction, const num::Tensor& boundary, const BoundaryMask& mask);

}  // namespace gefm::pipeline
