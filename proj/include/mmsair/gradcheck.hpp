// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmsair/parameters.hpp"
#include "mmsair/tensor.hpp"

namespace mmsair {

enum class Stencil {
  /// (f(x+h) - f(x-h)) / 2h
  central2,
  /// (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h
  central4,
};

/// Denominator floor of relative_error. Entries whose analytic and numeric
/// gradients are both below it are compared on an absolute scale, since the
/// finite difference of an exactly-zero gradient is pure rounding noise.
inline constexpr double kRelativeErrorFloor = 1e-8;

struct GradCheckResult {
  /// max over entries of relative_error(analytic, numeric)
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  /// Set when f produced a non-finite value; names the perturbed entry.
  std::optional<std::string> failure;

  bool passed(double tolerance) const { return !failure && max_relative_error < tolerance; }
};

/// |analytic - numeric| / max(|analytic|, |numeric|, kRelativeErrorFloor)
double relative_error(double analytic, double numeric);

/// Compares `analytic[i]` (one gradient buffer per parameter, same layout)
/// against finite differences of `f` obtained by perturbing each entry of
/// each parameter in place. Parameters are restored afterwards.
GradCheckResult finite_difference_check(const std::function<Real()>& f, const std::vector<NamedTensor>& params,
                                        const std::vector<std::vector<Real>>& analytic, Real eps,
                                        Stencil stencil = Stencil::central2);

/// Runs `loss_fn` once with backward to obtain analytic gradients, then checks
/// them against finite differences of `loss_fn().item()`.
GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn, const std::vector<NamedTensor>& params,
                                        Real eps, Stencil stencil = Stencil::central2);

}  // namespace mmsair
