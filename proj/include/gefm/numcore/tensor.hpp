#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gefm::num {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised whenever an operation produces NaN or Inf, or a value leaves its
/// admissible domain (e.g. a non-positive standard deviation).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Receives the gradient of the node's output and accumulates into the
// gradient buffers of its parents (nullptr for parents without grad).
using BackwardFn = std::function<void(const Node& self, std::span<const double> grad_out,
                                      std::span<std::vector<double>*> parent_grads)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  bool recorded = false;  // true for op outputs that carry a backward rule
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  BackwardFn backward;
};

}  // namespace detail

/// Dense row-major float64 array. Copies share storage; values are never
/// mutated after construction, so tensors can be shared freely across threads.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const { return data().size(); }
  /// Product of all extents except the last.
  std::size_t rows() const;
  /// Last extent (1 for scalars).
  std::size_t cols() const;

  std::span<const double> data() const;
  std::vector<double> to_vector() const;
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  const char* op_name() const;
  /// Same values, cut from the recorded graph.
  Tensor detach() const;
  /// Same values as a fresh leaf that requires grad.
  Tensor as_parameter() const;
  /// Reinterpret with a new shape of equal size (shares storage, keeps grad).
  Tensor reshape(Shape shape) const;

  const detail::Node* id() const { return node_.get(); }
  const detail::NodePtr& node() const { return node_; }

  static Tensor wrap(detail::NodePtr node);

 private:
  detail::NodePtr node_;
};

/// Disables op recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace gefm::num
