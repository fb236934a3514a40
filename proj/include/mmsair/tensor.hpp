// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with define-by-run reverse-mode differentiation.
// Every op that has an input requiring grad records a node holding its
// parents and a backward closure; `backward()` walks that graph once in
// reverse topological order.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mmsair {

#ifdef MMSAIR_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
struct Access;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);
  /// Row vector of shape [1, n].
  static Tensor row(std::vector<Real> values, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const Real> data() const;
  /// In-place access for parameter updates between steps. Never call on a
  /// tensor that belongs to a live graph.
  std::span<Real> mutable_data();
  std::vector<Real> to_vector() const;

  Real item() const;
  Real at(std::size_t i) const;
  Real at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  /// Accumulated gradient; all zeros when backward never reached this tensor.
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  /// Same values, cut from the graph.
  Tensor detach() const;

  /// Identity of the underlying storage.
  const void* id() const noexcept { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;

  friend struct detail::Access;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---- ops -----------------------------------------------------------------

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [n,in], weight [out,in], bias [out] (may be undefined) -> x·weightᵀ + bias, [n,out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real factor);
Tensor tanh(const Tensor& a);

/// Numerically stabilised softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);
/// Mean along `axis`; the axis is kept with size 1.
Tensor mean(const Tensor& x, std::size_t axis);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

/// Rows of `table` [V,d] selected by `indices` -> [indices.size(), d].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

/// Valid (unpadded), stride-1 convolution.
/// x [c_in, L], weight [c_out, c_in, k], bias [c_out] -> [c_out, L - k + 1]
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Mean negative log-probability of the gold class; `probs` is [n, c].
/// Probabilities below kLogClamp are clamped and counted.
Tensor cross_entropy(const Tensor& probs, std::span<const std::size_t> labels);

inline constexpr Real kLogClamp = static_cast<Real>(1e-12);
/// Number of clamped log-probabilities seen by cross_entropy in this process.
std::size_t cross_entropy_clamp_count();

// ---- differentiation -----------------------------------------------------

/// Accumulates d loss / d t into `t.grad()` for every requires-grad tensor
/// reachable from the scalar `loss`.
void backward(const Tensor& loss);

/// Number of graph nodes reachable from `root` that require grad.
std::size_t graph_size(const Tensor& root);

}  // namespace mmsair
