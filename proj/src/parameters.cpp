// SPDX-License-Identifier: Apache-2.0

#include "mmsair/parameters.hpp"

#include <cmath>

#include "mmsair/errors.hpp"

namespace mmsair {

Tensor ParameterSet::add(std::string name, Tensor tensor) {
  if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
  if (!tensor.requires_grad()) throw ContractError("parameter '" + name + "' must require grad");
  entries_.push_back({std::move(name), tensor});
  return tensor;
}

const Tensor& ParameterSet::at(std::string_view name) const {
  if (const Tensor* t = find(name)) return *t;
  throw ContractError("unknown parameter '" + std::string(name) + "'");
}

const Tensor* ParameterSet::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParameterSet::zero_grad() const {
  for (auto& e : entries_) {
    Tensor t = e.tensor;
    t.zero_grad();
  }
}

std::vector<NamedTensor> ParameterSet::with_prefix(std::string_view prefix) const {
  std::vector<NamedTensor> out;
  for (const auto& e : entries_) {
    if (e.name.starts_with(prefix)) out.push_back(e);
  }
  return out;
}

Tensor uniform(Rng& rng, Shape shape, Real low, Real high) {
  std::uniform_real_distribution<double> dist(low, high);
  std::vector<Real> values(shape_numel(shape));
  for (Real& v : values) v = static_cast<Real>(dist(rng));
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor xavier_uniform(Rng& rng, std::size_t rows, std::size_t cols) {
  const Real bound = static_cast<Real>(std::sqrt(6.0 / static_cast<double>(rows + cols)));
  return uniform(rng, {rows, cols}, -bound, bound);
}

Tensor zeros_parameter(Shape shape) { return Tensor::zeros(std::move(shape), true); }

}  // namespace mmsair
