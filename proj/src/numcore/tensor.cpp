#include "gefm/numcore/tensor.hpp"

#include <numeric>
#include <sstream>

namespace gefm::num {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::wrap(detail::NodePtr node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.empty()) return 1;
  return shape_numel(s) / s.back();
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::data() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->data;
}

std::vector<double> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

Tensor Tensor::detach() const { return from(shape(), to_vector(), false); }

Tensor Tensor::as_parameter() const { return from(shape(), to_vector(), true); }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

}  // namespace gefm::num
