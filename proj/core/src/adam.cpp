// SPDX-License-Identifier: Apache-2.0
#include "catnet/adam.hpp"

#include <cmath>

#include "catnet/error.hpp"

namespace catnet {

void adam_step(Tensor& value, const Tensor& grad, AdamState& state, std::size_t t, const AdamConfig& config) {
  if (t < 1) throw ConfigError("adam_step: step index starts at 1");
  if (grad.shape() != value.shape()) throw ShapeError("adam_step: gradient shape does not match parameter");
  if (state.m.shape() != value.shape()) state.m = Tensor(value.shape());
  if (state.v.shape() != value.shape()) state.v = Tensor(value.shape());
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    value[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), state_(params_.size()), config_(config) {
  if (!(config_.lr > 0.0)) throw ConfigError("learning rate must be positive");
}

void Adam::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(params_[i]->value, params_[i]->grad, state_[i], t_, config_);
}

}  // namespace catnet
