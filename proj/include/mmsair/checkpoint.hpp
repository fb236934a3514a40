// SPDX-License-Identifier: Apache-2.0
//
// Binary parameter container shared by fusion, heads, encoders and optimizer
// state.
//
// Layout (little-endian):
//   "MSCK"            4 bytes
//   version           u16   (currently 1)
//   config_len        u32
//   config            config_len bytes of UTF-8 JSON (config echo)
//   tensor_count      u32
//   tensor_count x {
//     name_len u16, name bytes (UTF-8), rank u8, rank x u32 dims,
//     product(dims) x f32
//   }
//
// Adam state, when present, is stored as extra tensors "adam.step" ([1]),
// "adam.m/<param>" and "adam.v/<param>".

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmsair/optimizer.hpp"
#include "mmsair/parameters.hpp"

namespace mmsair {

struct StoredTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

struct Checkpoint {
  static constexpr std::uint16_t kVersion = 1;

  std::string config_json;
  std::vector<StoredTensor> tensors;

  const StoredTensor* find(std::string_view name) const;

  std::vector<std::uint8_t> serialize() const;
  void write(const std::filesystem::path& path) const;
  /// Throws FormatError with the byte offset of the first problem.
  static Checkpoint parse(std::span<const std::uint8_t> bytes);
  static Checkpoint read(const std::filesystem::path& path);
};

/// Snapshot of parameters (and optionally Adam state) at 32-bit precision.
Checkpoint make_checkpoint(const ParameterSet& params, std::string config_json, const AdamState* adam = nullptr);

/// Copies stored values into `params`. Every parameter must be present with
/// identical dims, otherwise CheckpointError.
void load_parameters(const Checkpoint& checkpoint, const ParameterSet& params);

/// Restores Adam buffers for `params`; false when the checkpoint has none.
bool load_adam_state(const Checkpoint& checkpoint, const ParameterSet& params, AdamState& state);

}  // namespace mmsair
