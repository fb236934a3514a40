// SPDX-License-Identifier: Apache-2.0

#include "mmsair/encoders.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <utility>

#include "mmsair/errors.hpp"

namespace mmsair {

std::string_view to_string(ProviderKind kind) { return kind == ProviderKind::toy ? "toy" : "precomputed"; }

ProviderKind parse_provider_kind(std::string_view text) {
  if (text == "toy") return ProviderKind::toy;
  if (text == "precomputed") return ProviderKind::precomputed;
  throw ConfigError("unknown provider '" + std::string(text) + "', expected toy or precomputed");
}

void EncoderConfig::validate(std::size_t num_heads) const {
  if (d_model == 0) throw ConfigError("d_model must be positive");
  if (num_heads == 0 || d_model % num_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(num_heads) +
                      " attention heads");
  }
  if (conv_kernel < 1) throw ConfigError("conv_kernel must be at least 1");
  if (image_input_dim < conv_kernel) throw ConfigError("image_input_dim must be at least conv_kernel");
  if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
}

// ---- tokenizer ---------------------------------------------------------------

namespace {

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

// U+3000 ideographic space is common in CJK chat text.
constexpr std::string_view kIdeographicSpace = "\xE3\x80\x80";

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  bool non_ascii = false;
  auto flush = [&] {
    if (current.empty()) return;
    if (!non_ascii) {
      tokens.push_back(std::move(current));
    } else {
      std::string ascii_run;
      for (std::size_t i = 0; i < current.size();) {
        const auto lead = static_cast<unsigned char>(current[i]);
        if (lead < 0x80) {
          ascii_run += current[i++];
          continue;
        }
        if (!ascii_run.empty()) tokens.push_back(std::exchange(ascii_run, {}));
        const std::size_t len = std::min(utf8_length(lead), current.size() - i);
        tokens.push_back(current.substr(i, len));
        i += len;
      }
      if (!ascii_run.empty()) tokens.push_back(std::move(ascii_run));
    }
    current.clear();
    non_ascii = false;
  };
  for (std::size_t i = 0; i < text.size();) {
    if (is_ascii_space(text[i])) {
      flush();
      ++i;
    } else if (text.substr(i, kIdeographicSpace.size()) == kIdeographicSpace) {
      flush();
      i += kIdeographicSpace.size();
    } else {
      const auto c = static_cast<unsigned char>(text[i]);
      if (c >= 0x80) non_ascii = true;
      current += c < 0x80 ? static_cast<char>(std::tolower(c)) : text[i];
      ++i;
    }
  }
  flush();
  return tokens;
}

std::vector<std::size_t> hash_tokens(std::span<const std::string> tokens, std::size_t vocab_size) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    ids.push_back(static_cast<std::size_t>(h % vocab_size));
  }
  return ids;
}

// ---- thumbnails --------------------------------------------------------------

void ThumbnailSet::insert(std::string ref, std::vector<Real> values) {
  if (values.size() != pixels_) {
    throw ContractError("thumbnail '" + ref + "' has " + std::to_string(values.size()) + " pixels, expected " +
                        std::to_string(pixels_));
  }
  images_[std::move(ref)] = std::move(values);
}

const std::vector<Real>* ThumbnailSet::find(std::string_view ref) const {
  auto it = images_.find(ref);
  return it == images_.end() ? nullptr : &it->second;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok += c;
  }
  return tok;
}

}  // namespace

std::vector<Real> read_pgm(const std::filesystem::path& path, std::size_t* width_out, std::size_t* height_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image " + path.string());
  const std::string magic = pgm_token(in);
  if (magic != "P5" && magic != "P2") throw Error(path.string() + ": not a PGM file");
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(pgm_token(in));
    height = std::stoul(pgm_token(in));
    maxval = std::stoul(pgm_token(in));
  } catch (const std::exception&) {
    throw Error(path.string() + ": malformed PGM header");
  }
  if (width == 0 || height == 0 || maxval == 0 || maxval > 255) {
    throw Error(path.string() + ": unsupported PGM dimensions or depth");
  }
  std::vector<Real> pixels(width * height);
  if (magic == "P5") {
    std::vector<char> raw(pixels.size());
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw Error(path.string() + ": truncated PGM data");
    for (std::size_t i = 0; i < raw.size(); ++i) {
      pixels[i] = static_cast<Real>(static_cast<unsigned char>(raw[i])) / static_cast<Real>(maxval);
    }
  } else {
    for (auto& p : pixels) {
      std::size_t v = 0;
      if (!(in >> v)) throw Error(path.string() + ": truncated PGM data");
      p = static_cast<Real>(v) / static_cast<Real>(maxval);
    }
  }
  if (width_out) *width_out = width;
  if (height_out) *height_out = height;
  return pixels;
}

void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::size_t width,
               std::size_t height) {
  if (pixels.size() != width * height) throw ContractError("write_pgm: pixel count does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

ThumbnailSet ThumbnailSet::load_directory(const std::filesystem::path& root, const Dataset& records,
                                          std::size_t pixels) {
  ThumbnailSet set(pixels);
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.sticker_image_ref).second) continue;
    try {
      auto values = read_pgm(root / r.sticker_image_ref);
      if (values.size() == pixels) set.insert(r.sticker_image_ref, std::move(values));
    } catch (const Error&) {
      // reported by find_unresolvable
    }
  }
  return set;
}

// ---- providers ---------------------------------------------------------------

namespace {

constexpr std::uint64_t kStoreWidthOffset = 7;

void check_store(const std::shared_ptr<const EmbeddingStore>& store, Modality modality, std::size_t width,
                 const char* what) {
  if (!store) throw ConfigError(std::string(what) + " provider is precomputed but no store was given");
  if (store->modality() != modality) {
    throw ConfigError(std::string(what) + " store has modality " + std::string(to_string(store->modality())));
  }
  if (store->width() != width) {
    throw FormatError(kStoreWidthOffset, std::string(what) + " store width " + std::to_string(store->width()) +
                                             " disagrees with configured width " + std::to_string(width));
  }
}

}  // namespace

void Providers::check(const EncoderConfig& config) const {
  if (config.context_provider == ProviderKind::precomputed) {
    check_store(context_store, Modality::context, config.d_model, "context");
  }
  if (config.sticker_text_provider == ProviderKind::precomputed) {
    check_store(sticker_text_store, Modality::sticker_text, config.d_model, "sticker-text");
  }
  if (config.image_provider == ProviderKind::precomputed) {
    check_store(image_store, Modality::sticker_image, config.image_input_dim, "sticker-image");
  } else {
    if (!thumbnails) throw ConfigError("sticker-image provider is toy but no thumbnails were given");
    if (thumbnails->pixels() != config.image_input_dim) {
      throw ConfigError("thumbnails have " + std::to_string(thumbnails->pixels()) + " pixels, image_input_dim is " +
                        std::to_string(config.image_input_dim));
    }
  }
}

std::vector<std::string> find_unresolvable(const Dataset& records, const EncoderConfig& config,
                                           const Providers& providers) {
  std::vector<std::string> missing;
  for (const auto& r : records) {
    bool ok = true;
    if (config.context_provider == ProviderKind::precomputed) {
      ok = ok && providers.context_store && providers.context_store->contains(r.id);
    } else {
      ok = ok && !tokenize(r.context).empty();
    }
    if (config.sticker_text_provider == ProviderKind::precomputed && !r.sticker_text.empty()) {
      ok = ok && providers.sticker_text_store && providers.sticker_text_store->contains(r.id);
    }
    if (config.image_provider == ProviderKind::precomputed) {
      ok = ok && providers.image_store && providers.image_store->contains(r.id);
    } else {
      ok = ok && providers.thumbnails && providers.thumbnails->find(r.sticker_image_ref);
    }
    if (!ok) missing.push_back(r.id);
  }
  return missing;
}

// ---- encoders ----------------------------------------------------------------

namespace {

Tensor store_vector(const EmbeddingStore* store, const ChatRecord& record, const char* what) {
  if (!store) throw MissingEmbeddingError(record.id, std::string("no ") + what + " store");
  auto v = store->find(record.id);
  if (!v) throw MissingEmbeddingError(record.id, std::string("not in ") + what + " store");
  return Tensor::row(std::vector<Real>(v->begin(), v->end()));
}

}  // namespace

Tensor encode_tokens(std::span<const std::size_t> token_ids, const TextEncoderParams& params) {
  if (token_ids.empty()) throw ContractError("encode_tokens: no tokens");
  Tensor pooled = mean(gather_rows(params.embedding, token_ids), 0);
  return tanh(linear(pooled, params.weight, params.bias));
}

Tensor reduce_image(std::span<const Real> raw, const ImageEncoderParams& params) {
  Tensor sequence = Tensor::from({1, raw.size()}, std::vector<Real>(raw.begin(), raw.end()));
  Tensor features = conv1d(sequence, params.weight, params.bias);  // [d, L - k + 1]
  Tensor pooled = mean(features, 1);                               // [d, 1]
  return reshape(pooled, {1, pooled.numel()});
}

Tensor encode_context(const ChatRecord& record, const EncoderConfig& config, const TextEncoderParams& params,
                      const Providers& providers) {
  if (config.context_provider == ProviderKind::precomputed) {
    return store_vector(providers.context_store.get(), record, "context");
  }
  const auto tokens = tokenize(record.context);
  if (tokens.empty()) throw ContractError("encode_context: record '" + record.id + "' has an empty context");
  const auto ids = hash_tokens(tokens, config.vocab_size);
  return encode_tokens(ids, params);
}

Tensor encode_sticker_text(const ChatRecord& record, const EncoderConfig& config,
                           const StickerTextEncoderParams& params, const Providers& providers) {
  const auto tokens = tokenize(record.sticker_text);
  if (tokens.empty()) return params.empty_text;
  if (config.sticker_text_provider == ProviderKind::precomputed) {
    return store_vector(providers.sticker_text_store.get(), record, "sticker-text");
  }
  return encode_tokens(hash_tokens(tokens, config.vocab_size), params.text);
}

Tensor encode_sticker_image(const ChatRecord& record, const EncoderConfig& config, const ImageEncoderParams& params,
                            const Providers& providers) {
  if (config.image_provider == ProviderKind::precomputed) {
    const EmbeddingStore* store = providers.image_store.get();
    if (!store) throw MissingEmbeddingError(record.id, "no sticker-image store");
    auto v = store->find(record.id);
    if (!v) throw MissingEmbeddingError(record.id, "not in sticker-image store");
    std::vector<Real> raw(v->begin(), v->end());
    return reduce_image(raw, params);
  }
  const std::vector<Real>* pixels = providers.thumbnails ? providers.thumbnails->find(record.sticker_image_ref) : nullptr;
  if (!pixels) throw MissingEmbeddingError(record.id, "no thumbnail for '" + record.sticker_image_ref + "'");
  return reduce_image(*pixels, params);
}

namespace {

TextEncoderParams make_text_params(const EncoderConfig& config, Rng& rng, ParameterSet& registry,
                                   const std::string& prefix) {
  TextEncoderParams p;
  const std::size_t d = config.d_model;
  p.embedding = registry.add(prefix + "embedding", uniform(rng, {config.vocab_size, d}, -1, 1));
  p.weight = registry.add(prefix + "weight", xavier_uniform(rng, d, d));
  p.bias = registry.add(prefix + "bias", zeros_parameter({d}));
  return p;
}

}  // namespace

ModalityEncoders::ModalityEncoders(const EncoderConfig& config, Providers providers, Rng& rng, ParameterSet& registry)
    : config_(config), providers_(std::move(providers)) {
  providers_.check(config_);
  const std::size_t d = config.d_model;
  if (config.context_provider == ProviderKind::toy) {
    context_ = make_text_params(config, rng, registry, "context_encoder.");
  }
  if (config.sticker_text_provider == ProviderKind::toy) {
    sticker_text_.text = make_text_params(config, rng, registry, "sticker_text_encoder.");
  }
  sticker_text_.empty_text = registry.add("sticker_text_encoder.empty_text", uniform(rng, {1, d}, -0.1, 0.1));
  const Real bound = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(config.conv_kernel)));
  image_.weight = registry.add("image_encoder.conv_weight", uniform(rng, {d, 1, config.conv_kernel}, -bound, bound));
  image_.bias = registry.add("image_encoder.conv_bias", zeros_parameter({d}));
}

Tensor ModalityEncoders::encode_context(const ChatRecord& record) const {
  return mmsair::encode_context(record, config_, context_, providers_);
}

Tensor ModalityEncoders::encode_sticker_text(const ChatRecord& record) const {
  return mmsair::encode_sticker_text(record, config_, sticker_text_, providers_);
}

Tensor ModalityEncoders::encode_sticker_image(const ChatRecord& record) const {
  return mmsair::encode_sticker_image(record, config_, image_, providers_);
}

EmbeddingTriple ModalityEncoders::encode(const ChatRecord& record) const {
  return {encode_context(record), encode_sticker_text(record), encode_sticker_image(record)};
}

}  // namespace mmsair
