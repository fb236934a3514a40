// SPDX-License-Identifier: Apache-2.0
//
// Representation fusion: the sticker image and sticker-text vectors are
// stacked into a two-token sequence, attended by the context, contrasted with
// the context through a differential vector, refined by two further attention
// blocks that take the first block's output as values, and projected to the
// combined feature vector.

#pragma once

#include <cstddef>
#include <vector>

#include "mmsair/parameters.hpp"
#include "mmsair/tensor.hpp"

namespace mmsair {

/// Learned projections of one multi-head attention application. Weights are
/// [d, d] in (out, in) layout, biases [d].
struct AttentionParams {
  Tensor w_query, b_query;
  Tensor w_key, b_key;
  Tensor w_value, b_value;
  Tensor w_output, b_output;
};

struct FusionConfig {
  std::size_t d_model = 32;
  std::size_t num_heads = 4;
  /// Width of the combined feature vector; 0 means d_model.
  std::size_t d_comb = 0;

  std::size_t combined_width() const noexcept { return d_comb == 0 ? d_model : d_comb; }
  void validate() const;
};

struct FusionParams {
  std::size_t d_model = 0;
  std::size_t num_heads = 0;
  std::size_t d_comb = 0;
  AttentionParams sticker_attention;  // context queries the image/sticker-text pair
  AttentionParams sticker_refine;     // sticker-text query and key
  AttentionParams context_refine;     // context query and key
  Tensor w_diff;                      // [d, d]
  Tensor b_diff;                      // [d]
  Tensor w_e;                         // [d_comb, 6d]
  Tensor b_e;                         // [d_comb]

  /// Random initialisation; every tensor is registered under "fusion.".
  static FusionParams create(const FusionConfig& config, Rng& rng, ParameterSet& registry);
};

struct FusionOutput {
  Tensor e_is;        // [2, d]; row 0 image, row 1 sticker-text
  Tensor o_mha;       // [1, d]
  Tensor v_diff;      // [1, d]
  Tensor o_s;         // [1, d]
  Tensor o_x;         // [1, d]
  Tensor e_combined;  // [1, d_comb]
};

/// Per-head attention weights of one attention application, [lq, lk] each.
struct AttentionTrace {
  std::vector<Tensor> weights;
};

/// Stacks e_i and e_s ([1, d] each) along the token axis.
Tensor concat_sticker(const Tensor& e_i, const Tensor& e_s);

struct StickerTokens {
  Tensor e_i;
  Tensor e_s;
};
StickerTokens split_sticker(const Tensor& e_is);

/// Scaled dot-product attention with learned input and output projections.
/// query [lq, d], key and value [lk, d] -> [lq, d].
Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value, const AttentionParams& params,
                            std::size_t num_heads, AttentionTrace* trace = nullptr);

/// w_diff · (o_mha - e_x) + b_diff
Tensor differential_vector(const Tensor& o_mha, const Tensor& e_x, const Tensor& w_diff, const Tensor& b_diff);

/// e_x, e_s, e_i are [1, d].
FusionOutput fuse(const Tensor& e_x, const Tensor& e_s, const Tensor& e_i, const FusionParams& params);

}  // namespace mmsair
