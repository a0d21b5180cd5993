#include "isqn/optim.hpp"

#include <cmath>

#include "isqn/errors.hpp"

namespace isqn {

namespace {

void check_grads(const ParamSet& params, const Gradients& grads) {
  if (grads.size() != params.size()) throw UsageError("gradient count does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i])) {
      throw UsageError("gradient shape mismatch for '" + params.name(i) + "'");
    }
    grads[i].require_finite("gradient of '" + params.name(i) + "'");
  }
}

}  // namespace

AdamState::AdamState(const ParamSet& params, AdamConfig config)
    : config_(config), m_(zeros_like(params)), v_(zeros_like(params)) {
  if (!(config.learning_rate >= 0.0) || !(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
      !(config.beta2 >= 0.0 && config.beta2 < 1.0) || !(config.epsilon > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

void adam_step(AdamState& state, ParamSet& params, const Gradients& grads) {
  check_grads(params, grads);
  if (state.m_.size() != params.size()) throw UsageError("Adam state does not match parameters");
  ++state.steps_;
  const auto& c = state.config_;
  const double t = static_cast<double>(state.steps_);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.frozen(i)) continue;
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = state.m_[i].data();
    auto v = state.v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
    params[i].require_finite("parameter '" + params.name(i) + "' after Adam step");
  }
}

void sgd_step(ParamSet& params, const Gradients& grads, double learning_rate) {
  check_grads(params, grads);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.frozen(i)) continue;
    auto p = params[i].data();
    auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= learning_rate * g[j];
    params[i].require_finite("parameter '" + params.name(i) + "' after SGD step");
  }
}

}  // namespace isqn
