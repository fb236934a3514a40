// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mmsair/tensor.hpp"

namespace mmsair {

using Rng = std::mt19937_64;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered registry of trainable tensors. Entries share storage with the
/// module structs that own them, so updates through either view are visible
/// to both.
class ParameterSet {
 public:
  Tensor add(std::string name, Tensor tensor);

  const Tensor& at(std::string_view name) const;
  const Tensor* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_elements() const;

  void zero_grad() const;

  /// Entries whose name starts with `prefix`.
  std::vector<NamedTensor> with_prefix(std::string_view prefix) const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<NamedTensor> entries_;
};

// Initializers. All draw from `rng` in a fixed order.

/// Glorot-uniform matrix [rows, cols].
Tensor xavier_uniform(Rng& rng, std::size_t rows, std::size_t cols);
Tensor uniform(Rng& rng, Shape shape, Real low, Real high);
Tensor zeros_parameter(Shape shape);

}  // namespace mmsair
