// SPDX-License-Identifier: Apache-2.0

#include "mmsair/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mmsair/errors.hpp"

namespace mmsair {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, kNumSentiments> kSentimentNames = {"positive", "negative", "neutral"};

constexpr std::array<std::string_view, kNumIntents> kIntentNames = {
    "Comfort", "Oppose",     "Greet",  "Complain", "Ask for help", "Taunt",  "Apologize",
    "Introduce", "Guess",    "Advise", "Compromise", "Praise",     "Inform", "Flaunt",
    "Criticize", "Thank",    "Agree",  "Leave",    "Query",        "Joke",
};

constexpr std::array<std::string_view, kNumStickerClasses> kStickerClassNames = {"P",   "A",   "C",   "P-t",
                                                                                  "A-t", "C-t", "Text"};

std::string normalize_label(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!text.empty() && is_space(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && is_space(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(std::string_view text, const std::array<std::string_view, N>& names) {
  const std::string key = normalize_label(text);
  for (std::size_t i = 0; i < N; ++i) {
    if (normalize_label(names[i]) == key) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(SentimentLabel label) { return kSentimentNames.at(static_cast<std::size_t>(label)); }
std::string_view to_string(IntentLabel label) { return kIntentNames.at(static_cast<std::size_t>(label)); }
std::string_view to_string(StickerClass label) { return kStickerClassNames.at(static_cast<std::size_t>(label)); }

std::optional<SentimentLabel> parse_sentiment(std::string_view text) {
  return parse_enum<SentimentLabel>(text, kSentimentNames);
}
std::optional<IntentLabel> parse_intent(std::string_view text) { return parse_enum<IntentLabel>(text, kIntentNames); }
std::optional<StickerClass> parse_sticker_class(std::string_view text) {
  return parse_enum<StickerClass>(text, kStickerClassNames);
}

bool sticker_class_has_text(StickerClass c) {
  switch (c) {
    case StickerClass::p:
    case StickerClass::a:
    case StickerClass::c:
      return false;
    default:
      return true;
  }
}

// ---- field mapping ---------------------------------------------------------

FieldMapping FieldMapping::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open field mapping " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("field mapping " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("field mapping must be a JSON object");
  FieldMapping mapping;
  for (const auto& [canonical, key] : doc.items()) {
    if (!key.is_string()) throw ConfigError("field mapping value for '" + canonical + "' must be a string");
    mapping.set(canonical, key.get<std::string>());
  }
  return mapping;
}

void FieldMapping::set(std::string_view canonical, std::string file_key) {
  if (std::find(kCanonicalFields.begin(), kCanonicalFields.end(), canonical) == kCanonicalFields.end()) {
    throw ConfigError("unknown canonical field '" + std::string(canonical) + "'");
  }
  keys_[std::string(canonical)] = std::move(file_key);
}

std::string FieldMapping::key(std::string_view canonical) const {
  auto it = keys_.find(canonical);
  return it == keys_.end() ? std::string(canonical) : it->second;
}

// ---- validation ------------------------------------------------------------

std::vector<Violation> validate_record(const ChatRecord& record) {
  std::vector<Violation> out;
  if (record.id.empty()) out.push_back({"id", "empty id"});
  if (record.context.empty()) out.push_back({"context", "empty context"});
  const bool has_text = !record.sticker_text.empty();
  if (has_text != sticker_class_has_text(record.sticker_class)) {
    out.push_back({"sticker_text", "class/text mismatch: class " + std::string(to_string(record.sticker_class)) +
                                       (has_text ? " with nonempty sticker_text" : " with empty sticker_text")});
  }
  return out;
}

// ---- I/O ---------------------------------------------------------------------

namespace {

std::string required_string(const nlohmann::json& obj, const FieldMapping& mapping, std::string_view field,
                            std::size_t line) {
  const std::string key = mapping.key(field);
  auto it = obj.find(key);
  if (it == obj.end()) throw DatasetError(line, "missing field '" + key + "'");
  if (!it->is_string()) throw DatasetError(line, "field '" + key + "' must be a string");
  return it->get<std::string>();
}

template <typename Enum, typename Parser>
Enum required_label(const nlohmann::json& obj, const FieldMapping& mapping, std::string_view field, std::size_t line,
                    Parser parse) {
  const std::string value = required_string(obj, mapping, field, line);
  auto parsed = parse(value);
  if (!parsed) throw DatasetError(line, "unknown label '" + value + "' for field '" + mapping.key(field) + "'");
  return *parsed;
}

}  // namespace

Dataset parse_dataset(std::string_view text, const FieldMapping& mapping) {
  Dataset records;
  std::set<std::string, std::less<>> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (eol == text.size()) break;
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw DatasetError(line_no, "record must be a JSON object");

    ChatRecord r;
    r.id = required_string(obj, mapping, "id", line_no);
    r.context = required_string(obj, mapping, "context", line_no);
    r.sticker_image_ref = required_string(obj, mapping, "sticker_image_ref", line_no);
    r.sticker_text = required_string(obj, mapping, "sticker_text", line_no);
    r.context_sentiment = required_label<SentimentLabel>(obj, mapping, "context_sentiment", line_no, parse_sentiment);
    r.sticker_sentiment = required_label<SentimentLabel>(obj, mapping, "sticker_sentiment", line_no, parse_sentiment);
    r.multimodal_sentiment =
        required_label<SentimentLabel>(obj, mapping, "multimodal_sentiment", line_no, parse_sentiment);
    r.multimodal_intent = required_label<IntentLabel>(obj, mapping, "multimodal_intent", line_no, parse_intent);
    r.sticker_class = required_label<StickerClass>(obj, mapping, "sticker_class", line_no, parse_sticker_class);

    if (auto violations = validate_record(r); !violations.empty()) {
      throw DatasetError(line_no, "invalid record '" + r.id + "': " + violations.front().message);
    }
    if (!ids.insert(r.id).second) throw DatasetError(line_no, "duplicate id '" + r.id + "'");
    records.push_back(std::move(r));
    if (eol == text.size()) break;
  }
  return records;
}

Dataset load_dataset(const std::filesystem::path& path, const FieldMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), mapping);
}

std::string serialize_dataset(const Dataset& records, const FieldMapping& mapping) {
  std::string out;
  for (const ChatRecord& r : records) {
    ordered_json obj;
    obj[mapping.key("id")] = r.id;
    obj[mapping.key("context")] = r.context;
    obj[mapping.key("sticker_image_ref")] = r.sticker_image_ref;
    obj[mapping.key("sticker_text")] = r.sticker_text;
    obj[mapping.key("context_sentiment")] = to_string(r.context_sentiment);
    obj[mapping.key("sticker_sentiment")] = to_string(r.sticker_sentiment);
    obj[mapping.key("multimodal_sentiment")] = to_string(r.multimodal_sentiment);
    obj[mapping.key("multimodal_intent")] = to_string(r.multimodal_intent);
    obj[mapping.key("sticker_class")] = to_string(r.sticker_class);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& records, const std::filesystem::path& path, const FieldMapping& mapping) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset " + path.string());
  out << serialize_dataset(records, mapping);
}

// ---- split -------------------------------------------------------------------

DatasetSplit split_dataset(const Dataset& records, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ContractError("split_dataset: train fraction must lie in (0, 1)");
  }
  if (records.size() < 2) throw ContractError("split_dataset: need at least 2 records");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(records.size()) * train_fraction));
  DatasetSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? split.train : split.test).push_back(records[order[i]]);
  }
  return split;
}

// ---- statistics --------------------------------------------------------------

const LabelCount& CategoryStats::at(std::string_view label) const {
  for (const auto& l : labels) {
    if (l.label == label) return l;
  }
  throw ContractError("no label '" + std::string(label) + "' in category " + category);
}

const CategoryStats& StatsReport::category(std::string_view name) const {
  for (const auto& c : categories) {
    if (c.category == name) return c;
  }
  throw ContractError("no category '" + std::string(name) + "'");
}

namespace {

template <std::size_t N, typename Get>
CategoryStats count_category(std::string name, const Dataset& records, const std::array<std::string_view, N>& names,
                             Get get) {
  CategoryStats stats{std::move(name), {}};
  std::array<std::size_t, N> counts{};
  for (const auto& r : records) ++counts[static_cast<std::size_t>(get(r))];
  for (std::size_t i = 0; i < N; ++i) {
    stats.labels.push_back(
        {std::string(names[i]), counts[i], static_cast<double>(counts[i]) / static_cast<double>(records.size())});
  }
  return stats;
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

StatsReport label_statistics(const Dataset& records) {
  if (records.empty()) throw ContractError("label_statistics: empty dataset");
  StatsReport report;
  report.total = records.size();
  report.categories.push_back(count_category("context_sentiment", records, kSentimentNames,
                                             [](const ChatRecord& r) { return r.context_sentiment; }));
  report.categories.push_back(count_category("sticker_sentiment", records, kSentimentNames,
                                             [](const ChatRecord& r) { return r.sticker_sentiment; }));
  report.categories.push_back(count_category("multimodal_sentiment", records, kSentimentNames,
                                             [](const ChatRecord& r) { return r.multimodal_sentiment; }));
  report.categories.push_back(count_category("multimodal_intent", records, kIntentNames,
                                             [](const ChatRecord& r) { return r.multimodal_intent; }));
  report.categories.push_back(count_category("sticker_class", records, kStickerClassNames,
                                             [](const ChatRecord& r) { return r.sticker_class; }));
  return report;
}

std::string StatsReport::to_json() const {
  ordered_json doc;
  doc["total"] = total;
  ordered_json cats = ordered_json::object();
  for (const auto& c : categories) {
    ordered_json labels = ordered_json::array();
    for (const auto& l : c.labels) {
      ordered_json entry;
      entry["label"] = l.label;
      entry["count"] = l.count;
      entry["proportion"] = round4(l.proportion);
      labels.push_back(std::move(entry));
    }
    cats[c.category] = std::move(labels);
  }
  doc["categories"] = std::move(cats);
  return doc.dump(2);
}

}  // namespace mmsair
