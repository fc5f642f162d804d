#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "gefm/numcore/autodiff.hpp"
#include "gefm/numcore/tensor.hpp"

namespace gefm::num {

/// Flat, name-ordered collection of learnable tensors. Iteration order is the
/// lexicographic name order, which makes serialization and optimizer updates
/// deterministic.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  /// Stores `value` as a requires-grad leaf.
  void set(const std::string& name, const Tensor& value);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t total_numel() const;

  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  /// Largest absolute elementwise difference; stores must share names/shapes.
  static double max_abs_diff(const ParamStore& a, const ParamStore& b);

 private:
  Map params_;
};

using ParamGrads = std::map<std::string, std::vector<double>>;

/// Gradient for every stored parameter (zeros where the root does not reach).
ParamGrads collect_grads(const ParamStore& params, const Gradients& grads);

double grad_norm(const ParamGrads& grads);

}  // namespace gefm::num
