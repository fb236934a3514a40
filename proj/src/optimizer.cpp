// SPDX-License-Identifier: Apache-2.0

#include "mmsair/optimizer.hpp"

#include <cmath>

#include "mmsair/errors.hpp"

namespace mmsair {

void OptimConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
}

AdamState AdamState::zeros_like(const ParameterSet& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), Real{0});
    s.v.emplace_back(p.tensor.numel(), Real{0});
  }
  return s;
}

void adam_step(const ParameterSet& params, AdamState& state, const OptimConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: state holds " + std::to_string(state.m.size()) + " buffers for " +
                        std::to_string(params.size()) + " parameters");
  }
  std::size_t idx = 0;
  for (const auto& p : params) {
    const std::size_t n = p.tensor.numel();
    if (state.m[idx].size() != n || state.v[idx].size() != n) {
      throw ContractError("adam_step: moment shape mismatch for " + p.name);
    }
    const auto g = p.tensor.grad();
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("adam_step: non-finite gradient in " + p.name + "[" + std::to_string(i) +
                           "], step aborted");
      }
    }
    ++idx;
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const Real b1 = static_cast<Real>(config.beta1);
  const Real b2 = static_cast<Real>(config.beta2);

  idx = 0;
  for (const auto& p : params) {
    Tensor tensor = p.tensor;
    auto values = tensor.mutable_data();
    const auto g = tensor.grad();
    auto& m = state.m[idx];
    auto& v = state.v[idx];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = b1 * m[i] + (Real{1} - b1) * g[i];
      v[i] = b2 * v[i] + (Real{1} - b2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= static_cast<Real>(config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon));
    }
    ++idx;
  }
}

Adam::Adam(const ParameterSet& params, OptimConfig config)
    : params_(&params), config_(config), state_(AdamState::zeros_like(params)) {
  config_.validate();
}

void Adam::step() { adam_step(*params_, state_, config_); }

void Adam::zero_grad() { params_->zero_grad(); }

}  // namespace mmsair
