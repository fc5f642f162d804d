#include "gefm/numcore/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gefm::num {

void ParamStore::set(const std::string& name, const Tensor& value) {
  params_[name] = value.requires_grad() && value.node()->parents.empty() ? value : value.as_parameter();
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::total_numel() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.numel();
  return n;
}

double ParamStore::max_abs_diff(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) throw ShapeError("parameter stores differ in size");
  double worst = 0.0;
  for (const auto& [name, t] : a) {
    const auto& u = b.get(name);
    if (u.shape() != t.shape()) throw ShapeError("parameter '" + name + "' differs in shape");
    for (std::size_t i = 0; i < t.numel(); ++i) worst = std::max(worst, std::fabs(t[i] - u[i]));
  }
  return worst;
}

ParamGrads collect_grads(const ParamStore& params, const Gradients& grads) {
  ParamGrads out;
  for (const auto& [name, t] : params) {
    if (const auto* g = grads.find(t)) {
      out[name] = *g;
    } else {
      out[name].assign(t.numel(), 0.0);
    }
  }
  return out;
}

double grad_norm(const ParamGrads& grads) {
  double acc = 0.0;
  for (const auto& [_, g] : grads)
    for (double v : g) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace gefm::num
