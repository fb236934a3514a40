// SPDX-License-Identifier: Apache-2.0
//
// Binary store of precomputed per-record vectors.
//
// Layout (little-endian):
//   "MSEM"            4 bytes
//   version           u16   (currently 1)
//   modality          u8    (0 context, 1 sticker_text, 2 sticker_image)
//   width             u32
//   count             u64
//   count x { id_len u16, id bytes (UTF-8), width x f32 }

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmsair {

enum class Modality : std::uint8_t { context = 0, sticker_text = 1, sticker_image = 2 };

std::string_view to_string(Modality m);

class EmbeddingStore {
 public:
  static constexpr std::uint16_t kVersion = 1;

  EmbeddingStore(Modality modality, std::uint32_t width);

  Modality modality() const noexcept { return modality_; }
  std::uint32_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return ids_.size(); }

  /// Throws ContractError on duplicate id or width mismatch.
  void insert(std::string id, std::span<const float> vector);

  std::optional<std::span<const float>> find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  std::vector<std::uint8_t> serialize() const;
  void write(const std::filesystem::path& path) const;

  /// Throws FormatError carrying the byte offset of the first problem.
  static EmbeddingStore parse(std::span<const std::uint8_t> bytes);
  static EmbeddingStore open(const std::filesystem::path& path);

 private:
  Modality modality_;
  std::uint32_t width_;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Free-function form of EmbeddingStore::open.
inline EmbeddingStore open_embedding_store(const std::filesystem::path& path) { return EmbeddingStore::open(path); }

}  // namespace mmsair
