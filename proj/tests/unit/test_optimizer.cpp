// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "mmsair/errors.hpp"
#include "mmsair/optimizer.hpp"

using namespace mmsair;

namespace {

void set_grad(const Tensor& t, std::vector<Real> g) {
  Tensor h = t;
  std::copy(g.begin(), g.end(), h.mutable_grad().begin());
}

}  // namespace

TEST_CASE("zero gradient leaves parameters unchanged") {
  ParameterSet params;
  const Tensor w = params.add("w", Tensor::row({1, -2, 3}, true));
  Adam adam(params, {});
  adam.step();
  CHECK(w.to_vector() == std::vector<Real>{1, -2, 3});
  CHECK(adam.state().step == 1);
}

TEST_CASE("first step moves each entry by lr * g / (|g| + eps)") {
  ParameterSet params;
  const Tensor w = params.add("w", Tensor::row({0.5, 0.5, 0.5}, true));
  const OptimConfig config{0.01, 0.9, 0.999, 1e-8};
  Adam adam(params, config);
  const std::vector<Real> g = {0.2, -3.0, 1e-6};
  set_grad(w, g);
  adam.step();
  for (std::size_t i = 0; i < 3; ++i) {
    // m_hat = g, v_hat = g^2 after bias correction
    const double expect = 0.5 - 0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(w.at(i) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("second step follows the bias-corrected moments") {
  ParameterSet params;
  const Tensor w = params.add("w", Tensor::row({0.0}, true));
  const OptimConfig config{0.1, 0.9, 0.999, 1e-8};
  Adam adam(params, config);
  set_grad(w, {1.0});
  adam.step();
  adam.zero_grad();
  set_grad(w, {-2.0});
  adam.step();
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -2.0;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 4.0;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  const double expect = -0.1 * 1.0 / (1.0 + 1e-8) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
  CHECK(w.at(0) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("updates are independent of registration order") {
  auto run = [](bool swapped) {
    ParameterSet params;
    Tensor a = Tensor::row({1, 2}, true), b = Tensor::row({-1, 0.5, 4}, true);
    if (swapped) {
      params.add("b", b);
      params.add("a", a);
    } else {
      params.add("a", a);
      params.add("b", b);
    }
    Adam adam(params, {0.05, 0.9, 0.999, 1e-8});
    for (int step = 0; step < 5; ++step) {
      adam.zero_grad();
      set_grad(a, {0.3 * step, -1.0});
      set_grad(b, {2.0, 0.1 * step, -0.7});
      adam.step();
    }
    std::vector<Real> out = a.to_vector();
    const auto bv = b.to_vector();
    out.insert(out.end(), bv.begin(), bv.end());
    return out;
  };
  CHECK(run(false) == run(true));
}

TEST_CASE("a vanishing learning rate barely moves parameters") {
  ParameterSet params;
  const Tensor w = params.add("w", Tensor::row({0.25, -0.75}, true));
  Adam adam(params, {1e-12, 0.9, 0.999, 1e-8});
  for (int step = 0; step < 10; ++step) {
    set_grad(w, {5.0, -5.0});
    adam.step();
  }
  CHECK(std::abs(w.at(0) - 0.25) < 1e-10);
  CHECK(std::abs(w.at(1) + 0.75) < 1e-10);
}

TEST_CASE("a non-finite gradient aborts the whole step") {
  ParameterSet params;
  const Tensor a = params.add("a", Tensor::row({1.0}, true));
  const Tensor b = params.add("b", Tensor::row({2.0}, true));
  Adam adam(params, {0.1, 0.9, 0.999, 1e-8});
  set_grad(a, {1.0});
  set_grad(b, {std::numeric_limits<Real>::quiet_NaN()});
  CHECK_THROWS_AS(adam.step(), NumericError);
  CHECK(a.at(0) == 1.0);
  CHECK(b.at(0) == 2.0);
  CHECK(adam.state().step == 0);
}

TEST_CASE("optimizer configuration is validated") {
  CHECK_THROWS_AS(OptimConfig({0, 0.9, 0.999, 1e-8}).validate(), ConfigError);
  CHECK_THROWS_AS(OptimConfig({1e-3, 1.0, 0.999, 1e-8}).validate(), ConfigError);
  CHECK_THROWS_AS(OptimConfig({1e-3, 0.9, 0.999, 0}).validate(), ConfigError);
}
