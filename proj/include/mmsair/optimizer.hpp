// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmsair/parameters.hpp"

namespace mmsair {

struct OptimConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// First and second moment buffers, one per parameter in registry order.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<Real>> m;
  std::vector<std::vector<Real>> v;

  static AdamState zeros_like(const ParameterSet& params);
};

/// Bias-corrected Adam update of every parameter from its accumulated grad.
/// Shapes are checked and all gradients scanned for NaN/Inf before anything
/// is modified; a non-finite gradient aborts the step with NumericError.
void adam_step(const ParameterSet& params, AdamState& state, const OptimConfig& config);

class Adam {
 public:
  Adam(const ParameterSet& params, OptimConfig config);

  void step();
  void zero_grad();

  const AdamState& state() const noexcept { return state_; }
  AdamState& state() noexcept { return state_; }
  const OptimConfig& config() const noexcept { return config_; }

 private:
  const ParameterSet* params_;
  OptimConfig config_;
  AdamState state_;
};

}  // namespace mmsair
