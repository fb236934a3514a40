// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mmsair/errors.hpp"
#include "mmsair/metrics.hpp"
#include "oracle.hpp"

using namespace mmsair;

using Labels = std::vector<std::size_t>;

TEST_CASE("perfect predictions score one") {
  const Labels g = {0, 1, 2, 2, 1};
  CHECK(accuracy(g, g) == 1.0);
  CHECK(weighted_f1(g, g, 3) == 1.0);
}

TEST_CASE("hand-computed weighted F1") {
  // class 0: P = 2/3, R = 1 -> F1 = 4/5; class 1: F1 = 0; weights 2/3, 1/3
  const Labels golds = {0, 0, 1}, preds = {0, 0, 0};
  CHECK(std::abs(weighted_f1(preds, golds, 2) - 8.0 / 15.0) < 1e-15);
  CHECK(accuracy(preds, golds) == doctest::Approx(2.0 / 3));
}

TEST_CASE("single-class predictions on a balanced set") {
  const Labels golds = {0, 1, 2, 0, 1, 2}, preds(6, 1);
  const ClassificationMetrics m = classification_metrics(preds, golds, 3);
  CHECK(m.accuracy == doctest::Approx(1.0 / 3));
  CHECK(m.per_class[0].precision == 0);
  CHECK(m.per_class[1].recall == 1);
  std::size_t support = 0;
  for (const auto& c : m.per_class) support += c.support;
  CHECK(support == 6);
}

TEST_CASE("relabeling classes consistently changes nothing") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> label(0, 4);
  Labels g(50), p(50);
  for (std::size_t i = 0; i < 50; ++i) g[i] = label(rng), p[i] = label(rng);
  Labels perm(5);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Labels g2(50), p2(50);
  for (std::size_t i = 0; i < 50; ++i) g2[i] = perm[g[i]], p2[i] = perm[p[i]];
  CHECK(weighted_f1(p2, g2, 5) == doctest::Approx(weighted_f1(p, g, 5)).epsilon(1e-15));
  CHECK(accuracy(p2, g2) == accuracy(p, g));
}

TEST_CASE("metrics agree with direct counting on random label sets") {
  std::mt19937_64 rng(17);
  for (std::size_t classes : {3, 20}) {
    std::uniform_int_distribution<std::size_t> label(0, classes - 1);
    std::uniform_int_distribution<std::size_t> length(1, 60);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = length(rng);
      Labels g(n), p(n);
      for (std::size_t i = 0; i < n; ++i) g[i] = label(rng), p[i] = label(rng);
      const ClassificationMetrics m = classification_metrics(p, g, classes);
      REQUIRE(std::abs(m.accuracy - oracle::accuracy(p, g)) <= 1e-12);
      REQUIRE(std::abs(m.weighted_f1 - oracle::weighted_f1(p, g, classes)) <= 1e-12);
      const auto ref = oracle::per_class(p, g, classes);
      for (std::size_t c = 0; c < classes; ++c) {
        REQUIRE(m.per_class[c].support == ref[c].support);
        REQUIRE(std::abs(m.per_class[c].f1 - ref[c].f1) <= 1e-12);
      }
    }
  }
}

TEST_CASE("confusion matrices merge associatively") {
  ConfusionMatrix a(3), b(3), all(3);
  const Labels g = {0, 1, 2, 2, 0, 1}, p = {0, 2, 2, 1, 0, 1};
  for (std::size_t i = 0; i < 6; ++i) {
    (i < 3 ? a : b).add(g[i], p[i]);
    all.add(g[i], p[i]);
  }
  a.merge(b);
  CHECK(a.total() == 6);
  const auto x = a.summarize(), y = all.summarize();
  CHECK(x.weighted_f1 == y.weighted_f1);
  CHECK(x.accuracy == y.accuracy);
}

TEST_CASE("metric contracts") {
  const Labels two = {0, 1}, one = {0};
  CHECK_THROWS_AS(weighted_f1(two, one, 2), ContractError);
  CHECK_THROWS_AS(weighted_f1({}, {}, 2), ContractError);
  ConfusionMatrix m(2);
  CHECK_THROWS(m.add(2, 0));
}
