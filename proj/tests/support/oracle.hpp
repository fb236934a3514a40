// SPDX-License-Identifier: Apache-2.0
//
// Straight-line reference computations used by the tests. Nothing here touches
// the autodiff graph: every routine works on plain row-major double matrices
// so a bug in the library cannot leak into the expected values.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mmsair/fusion.hpp"
#include "mmsair/tensor.hpp"

namespace oracle {

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

inline Mat zeros(std::size_t rows, std::size_t cols) { return {rows, cols, std::vector<double>(rows * cols, 0.0)}; }

/// Copies a rank-1 or rank-2 tensor; rank 1 becomes a single row.
inline Mat of(const mmsair::Tensor& t) {
  Mat m;
  m.rows = t.rank() == 1 ? 1 : t.dim(0);
  m.cols = t.rank() == 1 ? t.dim(0) : t.dim(1);
  m.v.assign(t.data().begin(), t.data().end());
  return m;
}

/// x W^T + b, with W stored [out, in] and b a row of width out.
inline Mat affine(const Mat& x, const Mat& w, const Mat& b) {
  Mat out = zeros(x.rows, w.rows);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t o = 0; o < w.rows; ++o) {
      double acc = b.v[o];
      for (std::size_t i = 0; i < x.cols; ++i) acc += x(r, i) * w(o, i);
      out(r, o) = acc;
    }
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  double top = z[0];
  for (double x : z) top = x > top ? x : top;
  std::vector<double> e(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += e[i] = std::exp(z[i] - top);
  for (double& x : e) x /= total;
  return e;
}

/// Scaled dot-product attention per head over column blocks of width d/h.
inline Mat attention(const Mat& q_in, const Mat& k_in, const Mat& v_in, const mmsair::AttentionParams& p,
                     std::size_t heads) {
  const Mat q = affine(q_in, of(p.w_query), of(p.b_query));
  const Mat k = affine(k_in, of(p.w_key), of(p.b_key));
  const Mat v = affine(v_in, of(p.w_value), of(p.b_value));
  const std::size_t d = q.cols, dh = d / heads;
  Mat concat = zeros(q.rows, d);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < q.rows; ++i) {
      std::vector<double> scores(k.rows);
      for (std::size_t j = 0; j < k.rows; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += q(i, h * dh + c) * k(j, h * dh + c);
        scores[j] = dot / std::sqrt(static_cast<double>(dh));
      }
      const auto w = softmax(scores);
      for (std::size_t c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k.rows; ++j) acc += w[j] * v(j, h * dh + c);
        concat(i, h * dh + c) = acc;
      }
    }
  }
  return affine(concat, of(p.w_output), of(p.b_output));
}

struct Fused {
  Mat o_mha, v_diff, o_s, o_x, e_combined;
};

/// The full fusion block written out step by step.
inline Fused fuse(const Mat& e_x, const Mat& e_s, const Mat& e_i, const mmsair::FusionParams& p) {
  const std::size_t d = e_x.cols;
  Mat e_is = zeros(2, d);
  for (std::size_t c = 0; c < d; ++c) {
    e_is(0, c) = e_i(0, c);
    e_is(1, c) = e_s(0, c);
  }
  Fused f;
  f.o_mha = attention(e_x, e_is, e_is, p.sticker_attention, p.num_heads);
  Mat diff = zeros(1, d);
  for (std::size_t c = 0; c < d; ++c) diff(0, c) = f.o_mha(0, c) - e_x(0, c);
  f.v_diff = affine(diff, of(p.w_diff), of(p.b_diff));
  f.o_s = attention(e_s, e_s, f.o_mha, p.sticker_refine, p.num_heads);
  f.o_x = attention(e_x, e_x, f.o_mha, p.context_refine, p.num_heads);
  Mat all = zeros(1, 6 * d);
  const Mat* parts[] = {&e_is, &e_x, &f.v_diff, &f.o_s, &f.o_x};
  std::size_t at = 0;
  for (const Mat* m : parts)
    for (double x : m->v) all.v[at++] = x;
  f.e_combined = affine(all, of(p.w_e), of(p.b_e));
  return f;
}

struct ClassScore {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
};

/// Per-class scores by direct counting over the label lists.
inline std::vector<ClassScore> per_class(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& golds,
                                         std::size_t classes) {
  std::vector<ClassScore> out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      predicted += preds[i] == c;
      actual += golds[i] == c;
      tp += preds[i] == c && golds[i] == c;
    }
    ClassScore& s = out[c];
    s.support = actual;
    s.precision = predicted ? static_cast<double>(tp) / predicted : 0.0;
    s.recall = actual ? static_cast<double>(tp) / actual : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  }
  return out;
}

inline double weighted_f1(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& golds,
                          std::size_t classes) {
  double total = 0.0;
  for (const auto& s : per_class(preds, golds, classes))
    total += static_cast<double>(s.support) / static_cast<double>(golds.size()) * s.f1;
  return total;
}

inline double accuracy(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& golds) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == golds[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

}  // namespace oracle
