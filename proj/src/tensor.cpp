// SPDX-License-Identifier: Apache-2.0

#include "mmsair/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "mmsair/errors.hpp"

namespace mmsair {

namespace detail {

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<Real>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Real{0});
    return grad;
  }
};

struct Access {
  static const std::shared_ptr<Node>& node(const Tensor& t) {
    if (!t.node_) throw ContractError("operation on an undefined tensor");
    return t.node_;
  }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

}  // namespace detail

namespace {

using detail::Access;
using detail::Node;

thread_local bool g_grad_enabled = true;
std::atomic<std::size_t> g_clamp_count{0};

void check_finite(const std::vector<Real>& values, const char* op) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream msg;
      msg << op << ": non-finite value " << values[i] << " at flat index " << i;
      throw NumericError(msg.str());
    }
  }
}

Node& node_of(const Tensor& t) { return *Access::node(t); }

using BackwardFn = std::function<void(Node&)>;

// Builds the result of an op. Parents and the backward closure are kept only
// when recording is on and some parent requires grad.
Tensor make_result(Shape shape, std::vector<Real> value, const char* op,
                   std::initializer_list<const Tensor*> parents, BackwardFn fn) {
  check_finite(value, op);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  bool any = false;
  if (g_grad_enabled) {
    for (const Tensor* p : parents) {
      if (p->defined() && p->requires_grad()) any = true;
    }
  }
  if (any) {
    n->requires_grad = true;
    for (const Tensor* p : parents) {
      if (p->defined()) n->parents.push_back(Access::node(*p));
    }
    n->backward = std::move(fn);
  }
  return Access::wrap(std::move(n));
}

// Accumulation target for parent i, or nullptr when it needs no gradient.
Real* grad_target(Node& self, std::size_t i) {
  Node& p = *self.parents.at(i);
  if (!p.requires_grad) return nullptr;
  return p.ensure_grad().data();
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got shape " + shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---- shape helpers ---------------------------------------------------------

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  check_finite(values, "Tensor::from");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), Real{0}, requires_grad); }

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

Tensor Tensor::scalar(Real value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::row(std::vector<Real> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({1, n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return node_of(*this).shape; }
std::size_t Tensor::numel() const { return node_of(*this).value.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw DimensionError("axis out of range for shape " + shape_to_string(s));
  return s[axis];
}

std::span<const Real> Tensor::data() const { return node_of(*this).value; }
std::span<Real> Tensor::mutable_data() { return node_of(*this).value; }
std::vector<Real> Tensor::to_vector() const { return node_of(*this).value; }

Real Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
  return data()[0];
}

Real Tensor::at(std::size_t i) const { return data()[i]; }

Real Tensor::at(std::size_t r, std::size_t c) const {
  require_rank(*this, 2, "at");
  return data()[r * shape()[1] + c];
}

bool Tensor::requires_grad() const { return node_of(*this).requires_grad; }

std::span<const Real> Tensor::grad() const { return node_of(*this).ensure_grad(); }
std::span<Real> Tensor::mutable_grad() { return node_of(*this).ensure_grad(); }

void Tensor::zero_grad() {
  auto& g = node_of(*this).ensure_grad();
  std::fill(g.begin(), g.end(), Real{0});
}

Tensor Tensor::detach() const {
  const Node& n = node_of(*this);
  return from(n.shape, n.value, false);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  const auto A = a.data();
  const auto B = b.data();
  std::vector<Real> out(m * n, Real{0});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * B[p * n + j];
    }
  }
  return make_result({m, n}, std::move(out), "matmul", {&a, &b}, [m, k, n](Node& self) {
    const Real* dC = self.grad.data();
    const auto& A = self.parents[0]->value;
    const auto& B = self.parents[1]->value;
    if (Real* dA = grad_target(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          Real acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += dC[i * n + j] * B[p * n + j];
          dA[i * k + p] += acc;
        }
    }
    if (Real* dB = grad_target(self, 1)) {
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) {
          Real acc = 0;
          for (std::size_t i = 0; i < m; ++i) acc += A[i * k + p] * dC[i * n + j];
          dB[p * n + j] += acc;
        }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t rows = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in) {
    throw DimensionError("linear: input " + shape_to_string(x.shape()) + " incompatible with weight " +
                         shape_to_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != out_dim) {
    throw DimensionError("linear: bias " + shape_to_string(bias.shape()) + " incompatible with weight " +
                         shape_to_string(weight.shape()));
  }
  const auto X = x.data();
  const auto W = weight.data();
  std::vector<Real> out(rows * out_dim);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      Real acc = has_bias ? bias.data()[o] : Real{0};
      for (std::size_t i = 0; i < in; ++i) acc += W[o * in + i] * X[r * in + i];
      out[r * out_dim + o] = acc;
    }
  }
  return make_result({rows, out_dim}, std::move(out), "linear", {&x, &weight, &bias},
                     [rows, in, out_dim](Node& self) {
                       const Real* dY = self.grad.data();
                       const auto& X = self.parents[0]->value;
                       const auto& W = self.parents[1]->value;
                       if (Real* dX = grad_target(self, 0)) {
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t o = 0; o < out_dim; ++o) {
                             const Real g = dY[r * out_dim + o];
                             for (std::size_t i = 0; i < in; ++i) dX[r * in + i] += g * W[o * in + i];
                           }
                       }
                       if (Real* dW = grad_target(self, 1)) {
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t o = 0; o < out_dim; ++o) {
                             const Real g = dY[r * out_dim + o];
                             for (std::size_t i = 0; i < in; ++i) dW[o * in + i] += g * X[r * in + i];
                           }
                       }
                       if (self.parents.size() > 2) {
                         if (Real* dB = grad_target(self, 2)) {
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t o = 0; o < out_dim; ++o) dB[o] += dY[r * out_dim + o];
                         }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto A = a.data();
  std::vector<Real> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_result({n, m}, std::move(out), "transpose", {&a}, [m, n](Node& self) {
    if (Real* dA = grad_target(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dA[i * n + j] += self.grad[j * m + i];
    }
  });
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), "add", {&a, &b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (Real* d = grad_target(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result(a.shape(), std::move(out), "sub", {&a, &b}, [](Node& self) {
    if (Real* d = grad_target(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    if (Real* d = grad_target(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), "mul", {&a, &b}, [](Node& self) {
    const auto& A = self.parents[0]->value;
    const auto& B = self.parents[1]->value;
    if (Real* d = grad_target(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * B[i];
    if (Real* d = grad_target(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * A[i];
  });
}

Tensor scale(const Tensor& a, Real factor) {
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return make_result(a.shape(), std::move(out), "scale", {&a}, [factor](Node& self) {
    if (Real* d = grad_target(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * factor;
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
  return make_result(a.shape(), std::move(out), "tanh", {&a}, [](Node& self) {
    if (Real* d = grad_target(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const Real y = self.value[i];
        d[i] += self.grad[i] * (Real{1} - y * y);
      }
  });
}

// ---- reductions ------------------------------------------------------------

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  const auto X = x.data();
  check_finite(std::vector<Real>(X.begin(), X.end()), "softmax input");
  std::vector<Real> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      Real mx = X[base];
      for (std::size_t j = 1; j < s.extent; ++j) mx = std::max(mx, X[base + j * s.inner]);
      Real total = 0;
      for (std::size_t j = 0; j < s.extent; ++j) {
        const Real e = std::exp(X[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.extent; ++j) out[base + j * s.inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), "softmax", {&x}, [s](Node& self) {
    Real* dX = grad_target(self, 0);
    if (!dX) return;
    const auto& Y = self.value;
    const auto& dY = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        Real dot = 0;
        for (std::size_t j = 0; j < s.extent; ++j) dot += dY[base + j * s.inner] * Y[base + j * s.inner];
        for (std::size_t j = 0; j < s.extent; ++j) {
          const std::size_t idx = base + j * s.inner;
          dX[idx] += Y[idx] * (dY[idx] - dot);
        }
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  return make_result({1}, {total}, "sum", {&x}, [](Node& self) {
    if (Real* d = grad_target(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) d[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "mean");
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  const auto X = x.data();
  std::vector<Real> out(s.outer * s.inner, Real{0});
  const Real inv = Real{1} / static_cast<Real>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      Real acc = 0;
      for (std::size_t j = 0; j < s.extent; ++j) acc += X[(o * s.extent + j) * s.inner + in];
      out[o * s.inner + in] = acc * inv;
    }
  return make_result(std::move(out_shape), std::move(out), "mean", {&x}, [s, inv](Node& self) {
    Real* dX = grad_target(self, 0);
    if (!dX) return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t in = 0; in < s.inner; ++in) {
        const Real g = self.grad[o * s.inner + in] * inv;
        for (std::size_t j = 0; j < s.extent; ++j) dX[(o * s.extent + j) * s.inner + in] += g;
      }
  });
}

// ---- structural ------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const AxisSplit s0 = split_axis(first, axis, "concat");
  std::vector<std::size_t> extents;
  std::size_t total_extent = 0;
  for (const Tensor& p : parts) {
    const Shape& sh = p.shape();
    bool ok = sh.size() == first.size();
    for (std::size_t i = 0; ok && i < sh.size(); ++i) {
      if (i != axis && sh[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: shape " + shape_to_string(sh) + " incompatible with " +
                           shape_to_string(first) + " along axis " + std::to_string(axis));
    }
    extents.push_back(sh[axis]);
    total_extent += sh[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total_extent;
  std::vector<Real> out(s0.outer * total_extent * s0.inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto P = parts[p].data();
    const std::size_t e = extents[p];
    for (std::size_t o = 0; o < s0.outer; ++o)
      for (std::size_t j = 0; j < e; ++j)
        for (std::size_t in = 0; in < s0.inner; ++in)
          out[(o * total_extent + offset + j) * s0.inner + in] = P[(o * e + j) * s0.inner + in];
    offset += e;
  }

  check_finite(out, "concat");
  auto n = std::make_shared<Node>();
  n->shape = std::move(out_shape);
  n->value = std::move(out);
  n->op = "concat";
  bool any = false;
  if (g_grad_enabled) {
    for (const Tensor& p : parts) any = any || p.requires_grad();
  }
  if (any) {
    n->requires_grad = true;
    for (const Tensor& p : parts) n->parents.push_back(Access::node(p));
    n->backward = [s0, extents, total_extent](Node& self) {
      std::size_t offset = 0;
      for (std::size_t p = 0; p < extents.size(); ++p) {
        const std::size_t e = extents[p];
        if (Real* d = grad_target(self, p)) {
          for (std::size_t o = 0; o < s0.outer; ++o)
            for (std::size_t j = 0; j < e; ++j)
              for (std::size_t in = 0; in < s0.inner; ++in)
                d[(o * e + j) * s0.inner + in] += self.grad[(o * total_extent + offset + j) * s0.inner + in];
        }
        offset += e;
      }
    };
  }
  return Access::wrap(std::move(n));
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (begin >= end || end > s.extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for shape " + shape_to_string(x.shape()));
  }
  const std::size_t e = end - begin;
  Shape out_shape = x.shape();
  out_shape[axis] = e;
  const auto X = x.data();
  std::vector<Real> out(s.outer * e * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < e; ++j)
      for (std::size_t in = 0; in < s.inner; ++in)
        out[(o * e + j) * s.inner + in] = X[(o * s.extent + begin + j) * s.inner + in];
  return make_result(std::move(out_shape), std::move(out), "slice", {&x}, [s, e, begin](Node& self) {
    Real* dX = grad_target(self, 0);
    if (!dX) return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t j = 0; j < e; ++j)
        for (std::size_t in = 0; in < s.inner; ++in)
          dX[(o * s.extent + begin + j) * s.inner + in] += self.grad[(o * e + j) * s.inner + in];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel() || shape.empty()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " + shape_to_string(shape));
  }
  return make_result(std::move(shape), x.to_vector(), "reshape", {&x}, [](Node& self) {
    if (Real* d = grad_target(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_rank(table, 2, "gather_rows");
  if (indices.empty()) throw ContractError("gather_rows: empty index list");
  const std::size_t rows = table.dim(0), width = table.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const auto T = table.data();
  std::vector<Real> out(idx.size() * width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[r]) + " out of range for " +
                           shape_to_string(table.shape()));
    }
    std::copy_n(T.begin() + static_cast<std::ptrdiff_t>(idx[r] * width), width, out.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  Shape out_shape{idx.size(), width};
  return make_result(std::move(out_shape), std::move(out), "gather_rows", {&table},
                     [idx = std::move(idx), width](Node& self) {
                       Real* dT = grad_target(self, 0);
                       if (!dT) return;
                       for (std::size_t r = 0; r < idx.size(); ++r)
                         for (std::size_t c = 0; c < width; ++c) dT[idx[r] * width + c] += self.grad[r * width + c];
                     });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "conv1d");
  require_rank(weight, 3, "conv1d");
  const std::size_t c_in = x.dim(0), len = x.dim(1);
  const std::size_t c_out = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw DimensionError("conv1d: input " + shape_to_string(x.shape()) + " incompatible with weight " +
                         shape_to_string(weight.shape()));
  }
  if (k > len) {
    throw DimensionError("conv1d: kernel " + std::to_string(k) + " longer than input " + shape_to_string(x.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != c_out) {
    throw DimensionError("conv1d: bias " + shape_to_string(bias.shape()) + " does not match " +
                         std::to_string(c_out) + " output channels");
  }
  const std::size_t out_len = len - k + 1;
  const auto X = x.data();
  const auto W = weight.data();
  std::vector<Real> out(c_out * out_len);
  for (std::size_t co = 0; co < c_out; ++co)
    for (std::size_t t = 0; t < out_len; ++t) {
      Real acc = has_bias ? bias.data()[co] : Real{0};
      for (std::size_t ci = 0; ci < c_in; ++ci)
        for (std::size_t j = 0; j < k; ++j) acc += W[(co * c_in + ci) * k + j] * X[ci * len + t + j];
      out[co * out_len + t] = acc;
    }
  return make_result({c_out, out_len}, std::move(out), "conv1d", {&x, &weight, &bias},
                     [c_in, len, c_out, k, out_len](Node& self) {
                       const auto& X = self.parents[0]->value;
                       const auto& W = self.parents[1]->value;
                       const auto& dY = self.grad;
                       Real* dX = grad_target(self, 0);
                       Real* dW = grad_target(self, 1);
                       Real* dB = self.parents.size() > 2 ? grad_target(self, 2) : nullptr;
                       for (std::size_t co = 0; co < c_out; ++co)
                         for (std::size_t t = 0; t < out_len; ++t) {
                           const Real g = dY[co * out_len + t];
                           if (dB) dB[co] += g;
                           for (std::size_t ci = 0; ci < c_in; ++ci)
                             for (std::size_t j = 0; j < k; ++j) {
                               const std::size_t wi = (co * c_in + ci) * k + j;
                               const std::size_t xi = ci * len + t + j;
                               if (dW) dW[wi] += g * X[xi];
                               if (dX) dX[xi] += g * W[wi];
                             }
                         }
                     });
}

Tensor cross_entropy(const Tensor& probs, std::span<const std::size_t> labels) {
  require_rank(probs, 2, "cross_entropy");
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  if (labels.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                         " probability rows");
  }
  const auto P = probs.data();
  std::vector<std::size_t> gold(labels.begin(), labels.end());
  std::vector<bool> clamped(n, false);
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gold[i] >= c) {
      throw DimensionError("cross_entropy: label " + std::to_string(gold[i]) + " out of range for " +
                           std::to_string(c) + " classes");
    }
    Real p = P[i * c + gold[i]];
    if (p < kLogClamp) {
      p = kLogClamp;
      clamped[i] = true;
      g_clamp_count.fetch_add(1, std::memory_order_relaxed);
    }
    total -= std::log(p);
  }
  const Real inv_n = Real{1} / static_cast<Real>(n);
  return make_result({1}, {total * inv_n}, "cross_entropy", {&probs},
                     [gold = std::move(gold), clamped = std::move(clamped), c, inv_n](Node& self) {
                       Real* dP = grad_target(self, 0);
                       if (!dP) return;
                       const auto& P = self.parents[0]->value;
                       for (std::size_t i = 0; i < gold.size(); ++i) {
                         if (clamped[i]) continue;
                         const std::size_t idx = i * c + gold[i];
                         dP[idx] -= self.grad[0] * inv_n / P[idx];
                       }
                     });
}

std::size_t cross_entropy_clamp_count() { return g_clamp_count.load(std::memory_order_relaxed); }

// ---- differentiation -------------------------------------------------------

namespace {

// Reverse post-order of the requires-grad subgraph rooted at `root`.
std::vector<Node*> topological_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (!root->requires_grad) return order;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace

void backward(const Tensor& loss) {
  Node& root = *Access::node(loss);
  if (root.value.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_to_string(root.shape));
  }
  if (!root.requires_grad) return;
  auto order = topological_order(&root);
  root.ensure_grad()[0] += Real{1};
  for (Node* n : order) {
    if (!n->backward) continue;
    n->ensure_grad();
    n->backward(*n);
  }
  for (Node* n : order) {
    if (!n->backward) continue;
    for (Real g : n->grad) {
      if (!std::isfinite(g)) throw NumericError(std::string("backward: non-finite gradient through ") + n->op);
    }
  }
}

std::size_t graph_size(const Tensor& root) { return topological_order(Access::node(root).get()).size(); }

}  // namespace mmsair
