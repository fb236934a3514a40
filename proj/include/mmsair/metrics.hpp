// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mmsair {

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::size_t samples = 0;
  std::vector<ClassMetrics> per_class;
};

/// Confusion counts [gold][pred], num_classes x num_classes, row-major.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  void add(std::size_t gold, std::size_t pred);
  void merge(const ConfusionMatrix& other);

  std::size_t num_classes() const noexcept { return n_; }
  std::size_t count(std::size_t gold, std::size_t pred) const { return counts_[gold * n_ + pred]; }
  std::size_t total() const noexcept { return total_; }

  /// Precision, recall and F1 are 0 where their denominators vanish.
  ClassificationMetrics summarize(std::span<const std::string> labels = {}) const;

 private:
  std::size_t n_;
  std::size_t total_ = 0;
  std::vector<std::size_t> counts_;
};

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> golds);

/// Σ_c (support_c / N) · F1_c. Throws ContractError on length mismatch or
/// empty input.
double weighted_f1(std::span<const std::size_t> preds, std::span<const std::size_t> golds, std::size_t num_classes);

ClassificationMetrics classification_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> golds,
                                             std::size_t num_classes, std::span<const std::string> labels = {});

}  // namespace mmsair
