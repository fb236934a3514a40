// SPDX-License-Identifier: Apache-2.0
//
// Modality encoders producing the context, sticker-text and sticker-image
// vectors. Each modality is served either by a small trainable "toy" encoder
// or by a precomputed EmbeddingStore.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmsair/dataset.hpp"
#include "mmsair/embedding_store.hpp"
#include "mmsair/parameters.hpp"
#include "mmsair/tensor.hpp"

namespace mmsair {

enum class ProviderKind { toy, precomputed };

std::string_view to_string(ProviderKind kind);
ProviderKind parse_provider_kind(std::string_view text);

struct EncoderConfig {
  std::size_t d_model = 32;
  std::size_t vocab_size = 4096;
  /// Width of the raw image representation fed to the 1-D convolution.
  std::size_t image_input_dim = 64;
  std::size_t conv_kernel = 3;
  ProviderKind context_provider = ProviderKind::toy;
  ProviderKind sticker_text_provider = ProviderKind::toy;
  ProviderKind image_provider = ProviderKind::toy;

  /// Throws ConfigError. `num_heads` is the fusion head count d_model must divide.
  void validate(std::size_t num_heads) const;
};

/// One vector per modality, each [1, d_model].
struct EmbeddingTriple {
  Tensor e_x;
  Tensor e_s;
  Tensor e_i;
};

/// Hashed bag-of-tokens -> mean -> linear -> tanh.
struct TextEncoderParams {
  Tensor embedding;  // [vocab, d]
  Tensor weight;     // [d, d]
  Tensor bias;       // [d]
};

struct StickerTextEncoderParams {
  TextEncoderParams text;
  Tensor empty_text;  // [1, d], used whenever sticker_text is empty
};

/// 1-D convolution over the raw image sequence, then global average pooling.
struct ImageEncoderParams {
  Tensor weight;  // [d, 1, kernel]
  Tensor bias;    // [d]
};

/// Whitespace tokens; tokens containing non-ASCII bytes fall back to one
/// token per UTF-8 code point. ASCII is lower-cased.
std::vector<std::string> tokenize(std::string_view text);
/// FNV-1a of each token, modulo `vocab_size`.
std::vector<std::size_t> hash_tokens(std::span<const std::string> tokens, std::size_t vocab_size);

/// Grayscale thumbnails keyed by sticker_image_ref, flattened row-major with
/// pixel values scaled to [0, 1].
class ThumbnailSet {
 public:
  explicit ThumbnailSet(std::size_t pixels) : pixels_(pixels) {}

  std::size_t pixels() const noexcept { return pixels_; }
  void insert(std::string ref, std::vector<Real> values);
  const std::vector<Real>* find(std::string_view ref) const;

  /// Loads every distinct `sticker_image_ref` of `records` as a PGM (P2/P5)
  /// file relative to `root`. Unreadable refs are skipped; callers detect them
  /// through `find_unresolvable`.
  static ThumbnailSet load_directory(const std::filesystem::path& root, const Dataset& records, std::size_t pixels);

 private:
  std::size_t pixels_;
  std::map<std::string, std::vector<Real>, std::less<>> images_;
};

/// Reads a binary (P5) or ASCII (P2) PGM file into [0, 1] values.
std::vector<Real> read_pgm(const std::filesystem::path& path, std::size_t* width = nullptr,
                           std::size_t* height = nullptr);
void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::size_t width,
               std::size_t height);

/// Backing data for the configured providers. Unused entries stay null.
struct Providers {
  std::shared_ptr<const EmbeddingStore> context_store;
  std::shared_ptr<const EmbeddingStore> sticker_text_store;
  std::shared_ptr<const EmbeddingStore> image_store;
  std::shared_ptr<const ThumbnailSet> thumbnails;

  /// Throws ConfigError if a configured provider lacks its backing data and
  /// FormatError if a store's header width disagrees with the configuration.
  void check(const EncoderConfig& config) const;
};

/// Ids of records that some configured provider cannot serve.
std::vector<std::string> find_unresolvable(const Dataset& records, const EncoderConfig& config,
                                           const Providers& providers);

Tensor encode_context(const ChatRecord& record, const EncoderConfig& config, const TextEncoderParams& params,
                      const Providers& providers);
Tensor encode_sticker_text(const ChatRecord& record, const EncoderConfig& config,
                           const StickerTextEncoderParams& params, const Providers& providers);
Tensor encode_sticker_image(const ChatRecord& record, const EncoderConfig& config, const ImageEncoderParams& params,
                            const Providers& providers);

/// Applies the toy text encoder to token ids directly.
Tensor encode_tokens(std::span<const std::size_t> token_ids, const TextEncoderParams& params);
/// Applies the image reduction to a raw image vector of width image_input_dim.
Tensor reduce_image(std::span<const Real> raw, const ImageEncoderParams& params);

/// The three encoders with their parameters registered under
/// "context_encoder.", "sticker_text_encoder." and "image_encoder.".
class ModalityEncoders {
 public:
  ModalityEncoders(const EncoderConfig& config, Providers providers, Rng& rng, ParameterSet& registry);

  Tensor encode_context(const ChatRecord& record) const;
  Tensor encode_sticker_text(const ChatRecord& record) const;
  Tensor encode_sticker_image(const ChatRecord& record) const;
  EmbeddingTriple encode(const ChatRecord& record) const;

  const EncoderConfig& config() const noexcept { return config_; }
  const Providers& providers() const noexcept { return providers_; }
  const TextEncoderParams& context_params() const noexcept { return context_; }
  const StickerTextEncoderParams& sticker_text_params() const noexcept { return sticker_text_; }
  const ImageEncoderParams& image_params() const noexcept { return image_; }

 private:
  EncoderConfig config_;
  Providers providers_;
  TextEncoderParams context_;
  StickerTextEncoderParams sticker_text_;
  ImageEncoderParams image_;
};

}  // namespace mmsair
