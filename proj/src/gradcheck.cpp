// SPDX-License-Identifier: Apache-2.0

#include "mmsair/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mmsair/errors.hpp"

namespace mmsair {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult finite_difference_check(const std::function<Real()>& f, const std::vector<NamedTensor>& params,
                                        const std::vector<std::vector<Real>>& analytic, Real eps, Stencil stencil) {
  if (!(eps > 0)) throw ContractError("finite_difference_check: eps must be positive");
  if (analytic.size() != params.size()) {
    throw DimensionError("finite_difference_check: " + std::to_string(analytic.size()) + " gradient buffers for " +
                         std::to_string(params.size()) + " parameters");
  }
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor param = params[p].tensor;
    auto values = param.mutable_data();
    if (analytic[p].size() != values.size()) {
      throw DimensionError("finite_difference_check: gradient buffer size mismatch for " + params[p].name);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Real original = values[i];
      auto eval_at = [&](Real offset) -> std::optional<Real> {
        values[i] = original + offset;
        try {
          const Real y = f();
          if (!std::isfinite(y)) return std::nullopt;
          return y;
        } catch (const NumericError&) {
          return std::nullopt;
        }
      };
      std::optional<double> numeric;
      if (stencil == Stencil::central2) {
        auto plus = eval_at(eps);
        auto minus = eval_at(-eps);
        if (plus && minus) numeric = (static_cast<double>(*plus) - *minus) / (2.0 * eps);
      } else {
        auto p2 = eval_at(2 * eps);
        auto p1 = eval_at(eps);
        auto m1 = eval_at(-eps);
        auto m2 = eval_at(-2 * eps);
        if (p2 && p1 && m1 && m2) {
          numeric = (-static_cast<double>(*p2) + 8.0 * *p1 - 8.0 * *m1 + *m2) / (12.0 * eps);
        }
      }
      values[i] = original;
      if (!numeric) {
        result.failure = "non-finite loss when perturbing " + params[p].name + "[" + std::to_string(i) + "]";
        return result;
      }
      const double a = analytic[p][i];
      const double err = relative_error(a, *numeric);
      ++result.entries_checked;
      result.max_absolute_error = std::max(result.max_absolute_error, std::abs(a - *numeric));
      if (result.entries_checked == 1 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = params[p].name;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = *numeric;
      }
    }
  }
  return result;
}

GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn, const std::vector<NamedTensor>& params,
                                        Real eps, Stencil stencil) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  backward(loss_fn());
  std::vector<std::vector<Real>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    auto g = p.tensor.grad();
    analytic.emplace_back(g.begin(), g.end());
  }
  auto value = [&loss_fn]() -> Real {
    NoGradGuard guard;
    return loss_fn().item();
  };
  return finite_difference_check(value, params, analytic, eps, stencil);
}

}  // namespace mmsair
