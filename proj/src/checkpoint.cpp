// SPDX-License-Identifier: Apache-2.0

#include "mmsair/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mmsair/errors.hpp"

namespace mmsair {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'S', 'C', 'K'};

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
    if (remaining() < n) throw FormatError(pos_, std::string("truncated checkpoint while reading ") + what);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

StoredTensor snapshot(std::string name, const Shape& shape, std::span<const Real> values) {
  StoredTensor t;
  t.name = std::move(name);
  for (std::size_t d : shape) t.dims.push_back(static_cast<std::uint32_t>(d));
  t.values.reserve(values.size());
  for (Real v : values) t.values.push_back(static_cast<float>(v));
  return t;
}

}  // namespace

const StoredTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint16_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config_json.size()));
  out.insert(out.end(), config_json.begin(), config_json.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF) throw ContractError("tensor name too long: " + t.name.substr(0, 32));
    if (t.dims.empty() || t.dims.size() > 0xFF) throw ContractError("unsupported rank for tensor " + t.name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint32_t>(out, d);
    for (float v : t.values) put<float>(out, v);
  }
  return out;
}

void Checkpoint::write(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::parse(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError(0, "bad magic, expected \"MSCK\"");
  const std::size_t version_at = in.pos();
  const auto version = in.get<std::uint16_t>("version");
  if (version != kVersion) throw FormatError(version_at, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto config_len = in.get<std::uint32_t>("config length");
  auto config = in.take(config_len, "config");
  ck.config_json.assign(reinterpret_cast<const char*>(config.data()), config.size());
  const auto count = in.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    const auto name_len = in.get<std::uint16_t>("name length");
    auto name = in.take(name_len, "name");
    t.name.assign(reinterpret_cast<const char*>(name.data()), name.size());
    const std::size_t rank_at = in.pos();
    const auto rank = in.get<std::uint8_t>("rank");
    if (rank == 0) throw FormatError(rank_at, "tensor '" + t.name + "' has rank 0");
    std::size_t numel = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      t.dims.push_back(in.get<std::uint32_t>("dims"));
      numel *= t.dims.back();
    }
    auto raw = in.take(numel * 4, "tensor values");
    t.values.resize(numel);
    std::memcpy(t.values.data(), raw.data(), raw.size());
    ck.tensors.push_back(std::move(t));
  }
  if (in.remaining() != 0) throw FormatError(in.pos(), "trailing bytes after last tensor");
  return ck;
}

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

Checkpoint make_checkpoint(const ParameterSet& params, std::string config_json, const AdamState* adam) {
  Checkpoint ck;
  ck.config_json = std::move(config_json);
  for (const auto& p : params) ck.tensors.push_back(snapshot(p.name, p.tensor.shape(), p.tensor.data()));
  if (adam) {
    if (adam->m.size() != params.size()) throw ContractError("Adam state does not match parameters");
    ck.tensors.push_back({"adam.step", {1}, {static_cast<float>(adam->step)}});
    std::size_t i = 0;
    for (const auto& p : params) {
      ck.tensors.push_back(snapshot("adam.m/" + p.name, p.tensor.shape(), adam->m[i]));
      ck.tensors.push_back(snapshot("adam.v/" + p.name, p.tensor.shape(), adam->v[i]));
      ++i;
    }
  }
  return ck;
}

namespace {

const StoredTensor& require_tensor(const Checkpoint& ck, const std::string& name, const Shape& shape) {
  const StoredTensor* t = ck.find(name);
  if (!t) throw CheckpointError("checkpoint has no tensor '" + name + "'");
  bool same = t->dims.size() == shape.size();
  for (std::size_t i = 0; same && i < shape.size(); ++i) same = t->dims[i] == shape[i];
  if (!same) {
    Shape stored(t->dims.begin(), t->dims.end());
    throw CheckpointError("tensor '" + name + "' has shape " + shape_to_string(stored) + ", model expects " +
                          shape_to_string(shape));
  }
  return *t;
}

}  // namespace

void load_parameters(const Checkpoint& checkpoint, const ParameterSet& params) {
  // Validate everything before touching any parameter.
  for (const auto& p : params) require_tensor(checkpoint, p.name, p.tensor.shape());
  for (const auto& p : params) {
    const StoredTensor& t = require_tensor(checkpoint, p.name, p.tensor.shape());
    Tensor target = p.tensor;
    auto values = target.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<Real>(t.values[i]);
  }
}

bool load_adam_state(const Checkpoint& checkpoint, const ParameterSet& params, AdamState& state) {
  const StoredTensor* step = checkpoint.find("adam.step");
  if (!step) return false;
  AdamState restored = AdamState::zeros_like(params);
  restored.step = static_cast<std::uint64_t>(step->values.at(0));
  std::size_t i = 0;
  for (const auto& p : params) {
    const auto& m = require_tensor(checkpoint, "adam.m/" + p.name, p.tensor.shape());
    const auto& v = require_tensor(checkpoint, "adam.v/" + p.name, p.tensor.shape());
    for (std::size_t j = 0; j < m.values.size(); ++j) {
      restored.m[i][j] = static_cast<Real>(m.values[j]);
      restored.v[i][j] = static_cast<Real>(v.values[j]);
    }
    ++i;
  }
  state = std::move(restored);
  return true;
}

}  // namespace mmsair
