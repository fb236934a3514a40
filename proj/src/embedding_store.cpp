// SPDX-License-Identifier: Apache-2.0

#include "mmsair/embedding_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mmsair/errors.hpp"

namespace mmsair {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");
static_assert(sizeof(float) == 4);

namespace {

constexpr char kMagic[4] = {'M', 'S', 'E', 'M'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) throw FormatError(pos_, std::string("truncated file while reading ") + what);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::context:
      return "context";
    case Modality::sticker_text:
      return "sticker_text";
    case Modality::sticker_image:
      return "sticker_image";
  }
  return "unknown";
}

EmbeddingStore::EmbeddingStore(Modality modality, std::uint32_t width) : modality_(modality), width_(width) {
  if (width == 0) throw ContractError("embedding store width must be positive");
}

void EmbeddingStore::insert(std::string id, std::span<const float> vector) {
  if (vector.size() != width_) {
    throw ContractError("embedding for '" + id + "' has width " + std::to_string(vector.size()) + ", store width is " +
                        std::to_string(width_));
  }
  if (id.size() > 0xFFFF) throw ContractError("embedding id longer than 65535 bytes");
  if (index_.count(id)) throw ContractError("duplicate embedding id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  values_.insert(values_.end(), vector.begin(), vector.end());
}

std::optional<std::span<const float>> EmbeddingStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return std::span<const float>(values_).subspan(it->second * width_, width_);
}

std::vector<std::uint8_t> EmbeddingStore::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(19 + ids_.size() * (2 + 16 + width_ * 4));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint16_t>(out, kVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(modality_));
  put<std::uint32_t>(out, width_);
  put<std::uint64_t>(out, ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(ids_[i].size()));
    out.insert(out.end(), ids_[i].begin(), ids_[i].end());
    for (std::size_t j = 0; j < width_; ++j) put<float>(out, values_[i * width_ + j]);
  }
  return out;
}

void EmbeddingStore::write(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding store " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingStore EmbeddingStore::parse(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError(0, "bad magic, expected \"MSEM\"");
  const std::size_t version_at = in.pos();
  const auto version = in.get<std::uint16_t>("version");
  if (version != kVersion) throw FormatError(version_at, "unsupported version " + std::to_string(version));
  const std::size_t modality_at = in.pos();
  const auto modality = in.get<std::uint8_t>("modality");
  if (modality > 2) throw FormatError(modality_at, "unknown modality tag " + std::to_string(modality));
  const std::size_t width_at = in.pos();
  const auto width = in.get<std::uint32_t>("width");
  if (width == 0) throw FormatError(width_at, "zero width");
  const auto count = in.get<std::uint64_t>("count");

  EmbeddingStore store(static_cast<Modality>(modality), width);
  std::vector<float> vec(width);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (in.remaining() == 0) {
      throw FormatError(in.pos(), "header count " + std::to_string(count) + " but only " + std::to_string(i) +
                                      " vectors present");
    }
    const auto id_len = in.get<std::uint16_t>("id length");
    auto id_bytes = in.take(id_len, "id");
    std::string id(reinterpret_cast<const char*>(id_bytes.data()), id_bytes.size());
    const std::size_t vec_at = in.pos();
    auto raw = in.take(std::size_t{width} * 4, "vector");
    std::memcpy(vec.data(), raw.data(), raw.size());
    if (store.contains(id)) throw FormatError(vec_at, "duplicate id '" + id + "'");
    store.insert(std::move(id), vec);
  }
  if (in.remaining() != 0) {
    throw FormatError(in.pos(), std::to_string(in.remaining()) + " trailing bytes after " + std::to_string(count) +
                                    " vectors; header count disagrees with contents");
  }
  return store;
}

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding store " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

}  // namespace mmsair
