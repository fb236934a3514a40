// SPDX-License-Identifier: Apache-2.0

#include "mmsair/fusion.hpp"

#include <cmath>
#include <string>

#include "mmsair/errors.hpp"

namespace mmsair {

void FusionConfig::validate() const {
  if (d_model == 0) throw ConfigError("d_model must be positive");
  if (num_heads == 0 || d_model % num_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(num_heads) +
                      " attention heads");
  }
}

namespace {

AttentionParams make_attention(std::size_t d, Rng& rng, ParameterSet& registry, const std::string& prefix) {
  AttentionParams p;
  p.w_query = registry.add(prefix + "w_query", xavier_uniform(rng, d, d));
  p.b_query = registry.add(prefix + "b_query", zeros_parameter({d}));
  p.w_key = registry.add(prefix + "w_key", xavier_uniform(rng, d, d));
  p.b_key = registry.add(prefix + "b_key", zeros_parameter({d}));
  p.w_value = registry.add(prefix + "w_value", xavier_uniform(rng, d, d));
  p.b_value = registry.add(prefix + "b_value", zeros_parameter({d}));
  p.w_output = registry.add(prefix + "w_output", xavier_uniform(rng, d, d));
  p.b_output = registry.add(prefix + "b_output", zeros_parameter({d}));
  return p;
}

void require_row(const Tensor& t, std::size_t width, const char* what) {
  if (t.rank() != 2 || t.dim(0) != 1 || t.dim(1) != width) {
    throw ContractError(std::string(what) + ": expected [1x" + std::to_string(width) + "], got " +
                        shape_to_string(t.shape()));
  }
}

}  // namespace

FusionParams FusionParams::create(const FusionConfig& config, Rng& rng, ParameterSet& registry) {
  config.validate();
  const std::size_t d = config.d_model;
  FusionParams p;
  p.d_model = d;
  p.num_heads = config.num_heads;
  p.d_comb = config.combined_width();
  p.sticker_attention = make_attention(d, rng, registry, "fusion.sticker_attention.");
  p.sticker_refine = make_attention(d, rng, registry, "fusion.sticker_refine.");
  p.context_refine = make_attention(d, rng, registry, "fusion.context_refine.");
  p.w_diff = registry.add("fusion.w_diff", xavier_uniform(rng, d, d));
  p.b_diff = registry.add("fusion.b_diff", zeros_parameter({d}));
  p.w_e = registry.add("fusion.w_e", xavier_uniform(rng, p.d_comb, 6 * d));
  p.b_e = registry.add("fusion.b_e", zeros_parameter({p.d_comb}));
  return p;
}

Tensor concat_sticker(const Tensor& e_i, const Tensor& e_s) {
  if (e_i.rank() != 2 || e_s.rank() != 2 || e_i.dim(0) != 1 || e_s.dim(0) != 1 || e_i.dim(1) != e_s.dim(1)) {
    throw ContractError("concat_sticker: widths differ or inputs are not single vectors, " +
                        shape_to_string(e_i.shape()) + " and " + shape_to_string(e_s.shape()));
  }
  return concat({e_i, e_s}, 0);
}

StickerTokens split_sticker(const Tensor& e_is) {
  if (e_is.rank() != 2 || e_is.dim(0) != 2) {
    throw ContractError("split_sticker: expected a 2-token sequence, got " + shape_to_string(e_is.shape()));
  }
  return {slice(e_is, 0, 0, 1), slice(e_is, 0, 1, 2)};
}

Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value, const AttentionParams& params,
                            std::size_t num_heads, AttentionTrace* trace) {
  if (query.rank() != 2 || key.rank() != 2 || value.rank() != 2) {
    throw DimensionError("multi_head_attention: query, key and value must be [tokens, d]");
  }
  const std::size_t d = query.dim(1);
  if (key.dim(1) != d || value.dim(1) != d) {
    throw DimensionError("multi_head_attention: widths differ, query " + shape_to_string(query.shape()) + ", key " +
                         shape_to_string(key.shape()) + ", value " + shape_to_string(value.shape()));
  }
  if (key.dim(0) != value.dim(0)) {
    throw DimensionError("multi_head_attention: key and value lengths differ, " + shape_to_string(key.shape()) +
                         " vs " + shape_to_string(value.shape()));
  }
  if (num_heads == 0 || d % num_heads != 0) {
    throw ConfigError("multi_head_attention: width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(num_heads) + " heads");
  }
  const std::size_t head_dim = d / num_heads;
  const Real inv_sqrt = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(head_dim)));

  const Tensor q = linear(query, params.w_query, params.b_query);
  const Tensor k = linear(key, params.w_key, params.b_key);
  const Tensor v = linear(value, params.w_value, params.b_value);

  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  if (trace) trace->weights.clear();
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    const Tensor qh = num_heads == 1 ? q : slice(q, 1, lo, hi);
    const Tensor kh = num_heads == 1 ? k : slice(k, 1, lo, hi);
    const Tensor vh = num_heads == 1 ? v : slice(v, 1, lo, hi);
    const Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);  // [lq, lk]
    const Tensor weights = softmax(scores, 1);
    if (trace) trace->weights.push_back(weights);
    heads.push_back(matmul(weights, vh));  // [lq, head_dim]
  }
  const Tensor merged = num_heads == 1 ? heads.front() : concat(heads, 1);
  return linear(merged, params.w_output, params.b_output);
}

Tensor differential_vector(const Tensor& o_mha, const Tensor& e_x, const Tensor& w_diff, const Tensor& b_diff) {
  if (o_mha.shape() != e_x.shape()) {
    throw ContractError("differential_vector: width mismatch " + shape_to_string(o_mha.shape()) + " vs " +
                        shape_to_string(e_x.shape()));
  }
  return linear(sub(o_mha, e_x), w_diff, b_diff);
}

FusionOutput fuse(const Tensor& e_x, const Tensor& e_s, const Tensor& e_i, const FusionParams& params) {
  const std::size_t d = params.d_model;
  require_row(e_x, d, "fuse: e_x");
  require_row(e_s, d, "fuse: e_s");
  require_row(e_i, d, "fuse: e_i");
  FusionOutput out;
  out.e_is = concat_sticker(e_i, e_s);
  out.o_mha = multi_head_attention(e_x, out.e_is, out.e_is, params.sticker_attention, params.num_heads);
  out.v_diff = differential_vector(out.o_mha, e_x, params.w_diff, params.b_diff);
  out.o_s = multi_head_attention(e_s, e_s, out.o_mha, params.sticker_refine, params.num_heads);
  out.o_x = multi_head_attention(e_x, e_x, out.o_mha, params.context_refine, params.num_heads);
  const Tensor flat_is = reshape(out.e_is, {1, 2 * d});
  const Tensor stacked = concat({flat_is, e_x, out.v_diff, out.o_s, out.o_x}, 1);  // [1, 6d]
  out.e_combined = linear(stacked, params.w_e, params.b_e);
  return out;
}

}  // namespace mmsair
