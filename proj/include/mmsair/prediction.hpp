// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "mmsair/dataset.hpp"
#include "mmsair/parameters.hpp"
#include "mmsair/tensor.hpp"

namespace mmsair {

struct HeadParams {
  Tensor w_s;  // [3, d_comb]
  Tensor b_s;  // [3]
  Tensor w_i;  // [20, d_comb]
  Tensor b_i;  // [20]

  /// Registered under "heads.".
  static HeadParams create(std::size_t d_comb, Rng& rng, ParameterSet& registry);
};

struct LossWeights {
  Real alpha = 1;
  Real beta = 1;

  /// Throws ConfigError when negative or both zero.
  void validate() const;
};

struct Probabilities {
  Tensor sentiment;  // [n, 3]
  Tensor intent;     // [n, 20]
};

struct PredictionOutput {
  Tensor p_sentiment;
  Tensor p_intent;
  Tensor l1;  // sentiment loss
  Tensor l2;  // intent loss
  Tensor l;   // joint loss
};

/// e_combined is [n, d_comb].
Probabilities predict(const Tensor& e_combined, const HeadParams& heads);

/// Forwards to the tensor-core op; mean of -log p[gold], clamped at 1e-12.
Tensor cross_entropy_loss(const Tensor& probs, std::span<const std::size_t> labels);

Tensor joint_loss(const Tensor& l1, const Tensor& l2, const LossWeights& weights);
Real joint_loss(Real l1, Real l2, const LossWeights& weights);

PredictionOutput predict_with_loss(const Tensor& e_combined, const HeadParams& heads,
                                   std::span<const std::size_t> sentiment_labels,
                                   std::span<const std::size_t> intent_labels, const LossWeights& weights);

}  // namespace mmsair
