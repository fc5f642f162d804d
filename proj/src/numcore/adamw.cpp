#include "gefm/numcore/adamw.hpp"

#include <cmath>

namespace gefm::num {

AdamWResult adamw_step(const ParamStore& params, const ParamGrads& grads, AdamWState state,
                       const AdamWConfig& config) {
  if (!(config.lr > 0)) throw std::invalid_argument("adamw_step: learning rate must be positive");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);

  ParamStore next;
  for (const auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end() || git->second.size() != p.numel()) {
      throw ShapeError("adamw_step: gradient for '" + name + "' missing or mis-shaped");
    }
    const auto& g = git->second;
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.empty()) m.assign(p.numel(), 0.0);
    if (v.empty()) v.assign(p.numel(), 0.0);
    if (m.size() != p.numel() || v.size() != p.numel()) {
      throw ShapeError("adamw_step: optimizer state for '" + name + "' mis-shaped");
    }
    std::vector<double> data = p.to_vector();
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      data[i] = data[i] * (1.0 - config.lr * config.weight_decay) -
                config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    next.set(name, Tensor::from(p.shape(), std::move(data), true));
  }
  return {std::move(next), std::move(state)};
}

}  // namespace gefm::num
