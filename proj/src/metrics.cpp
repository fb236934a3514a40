// SPDX-License-Identifier: Apache-2.0

#include "mmsair/metrics.hpp"

#include "mmsair/errors.hpp"

namespace mmsair {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw ContractError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::size_t gold, std::size_t pred) {
  if (gold >= n_ || pred >= n_) {
    throw ContractError("label out of range: gold " + std::to_string(gold) + ", pred " + std::to_string(pred) +
                        " for " + std::to_string(n_) + " classes");
  }
  ++counts_[gold * n_ + pred];
  ++total_;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw ContractError("cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

ClassificationMetrics ConfusionMatrix::summarize(std::span<const std::string> labels) const {
  if (total_ == 0) throw ContractError("no samples to summarize");
  ClassificationMetrics m;
  m.samples = total_;
  std::size_t correct = 0;
  for (std::size_t c = 0; c < n_; ++c) {
    std::size_t predicted = 0, support = 0;
    for (std::size_t k = 0; k < n_; ++k) {
      predicted += count(k, c);
      support += count(c, k);
    }
    const std::size_t tp = count(c, c);
    correct += tp;
    ClassMetrics cls;
    cls.label = c < labels.size() ? labels[c] : std::to_string(c);
    cls.support = support;
    cls.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    cls.recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    const double pr = cls.precision + cls.recall;
    cls.f1 = pr > 0 ? 2.0 * cls.precision * cls.recall / pr : 0.0;
    m.weighted_f1 += cls.f1 * static_cast<double>(support) / static_cast<double>(total_);
    m.per_class.push_back(std::move(cls));
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total_);
  return m;
}

ClassificationMetrics classification_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> golds,
                                             std::size_t num_classes, std::span<const std::string> labels) {
  if (preds.size() != golds.size()) {
    throw ContractError("prediction/gold length mismatch: " + std::to_string(preds.size()) + " vs " +
                        std::to_string(golds.size()));
  }
  if (preds.empty()) throw ContractError("metrics need at least one sample");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(golds[i], preds[i]);
  return cm.summarize(labels);
}

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> golds) {
  if (preds.size() != golds.size()) throw ContractError("prediction/gold length mismatch");
  if (preds.empty()) throw ContractError("accuracy needs at least one sample");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double weighted_f1(std::span<const std::size_t> preds, std::span<const std::size_t> golds, std::size_t num_classes) {
  return classification_metrics(preds, golds, num_classes).weighted_f1;
}

}  // namespace mmsair
