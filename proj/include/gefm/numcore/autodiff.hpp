#pragma once

#include <unordered_map>
#include <vector>

#include "gefm/numcore/tensor.hpp"

namespace gefm::num {

/// Gradients of a scalar root with respect to every requires-grad leaf it
/// depends on. Leaves the root does not reach are absent.
class Gradients {
 public:
  bool empty() const { return grads_.empty(); }
  std::size_t size() const { return grads_.size(); }
  bool has(const Tensor& leaf) const { return grads_.count(leaf.id()) != 0; }
  /// Gradient shaped like `leaf`; zeros when the root does not depend on it.
  Tensor of(const Tensor& leaf) const;
  const std::vector<double>* find(const Tensor& leaf) const;

 private:
  friend Gradients backward(const Tensor& root);
  std::unordered_map<const detail::Node*, std::vector<double>> grads_;
};

/// Reverse-mode sweep over the recorded graph below `root` (a scalar).
Gradients backward(const Tensor& root);

}  // namespace gefm::num
