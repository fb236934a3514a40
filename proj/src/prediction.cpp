// SPDX-License-Identifier: Apache-2.0

#include "mmsair/prediction.hpp"

#include <string>

#include "mmsair/errors.hpp"

namespace mmsair {

HeadParams HeadParams::create(std::size_t d_comb, Rng& rng, ParameterSet& registry) {
  HeadParams h;
  h.w_s = registry.add("heads.w_s", xavier_uniform(rng, kNumSentiments, d_comb));
  h.b_s = registry.add("heads.b_s", zeros_parameter({kNumSentiments}));
  h.w_i = registry.add("heads.w_i", xavier_uniform(rng, kNumIntents, d_comb));
  h.b_i = registry.add("heads.b_i", zeros_parameter({kNumIntents}));
  return h;
}

void LossWeights::validate() const {
  if (alpha < 0 || beta < 0) throw ConfigError("loss weights must be non-negative");
  if (alpha == 0 && beta == 0) throw ConfigError("loss weights alpha and beta cannot both be zero");
}

Probabilities predict(const Tensor& e_combined, const HeadParams& heads) {
  if (e_combined.rank() != 2 || e_combined.dim(1) != heads.w_s.dim(1)) {
    throw ContractError("predict: combined features " + shape_to_string(e_combined.shape()) +
                        " do not match head width " + std::to_string(heads.w_s.dim(1)));
  }
  return {softmax(linear(e_combined, heads.w_s, heads.b_s), 1), softmax(linear(e_combined, heads.w_i, heads.b_i), 1)};
}

Tensor cross_entropy_loss(const Tensor& probs, std::span<const std::size_t> labels) {
  return cross_entropy(probs, labels);
}

Tensor joint_loss(const Tensor& l1, const Tensor& l2, const LossWeights& weights) {
  return add(scale(l1, weights.alpha), scale(l2, weights.beta));
}

Real joint_loss(Real l1, Real l2, const LossWeights& weights) { return weights.alpha * l1 + weights.beta * l2; }

PredictionOutput predict_with_loss(const Tensor& e_combined, const HeadParams& heads,
                                   std::span<const std::size_t> sentiment_labels,
                                   std::span<const std::size_t> intent_labels, const LossWeights& weights) {
  PredictionOutput out;
  auto probs = predict(e_combined, heads);
  out.p_sentiment = probs.sentiment;
  out.p_intent = probs.intent;
  out.l1 = cross_entropy(out.p_sentiment, sentiment_labels);
  out.l2 = cross_entropy(out.p_intent, intent_labels);
  out.l = joint_loss(out.l1, out.l2, weights);
  return out;
}

}  // namespace mmsair
