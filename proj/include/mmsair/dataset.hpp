// SPDX-License-Identifier: Apache-2.0
//
// MSAIRS chat records: label vocabularies, JSON-lines I/O, splitting and
// label statistics.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmsair {

enum class SentimentLabel : std::uint8_t { positive = 0, negative = 1, neutral = 2 };

inline constexpr std::size_t kNumSentiments = 3;
inline constexpr std::size_t kNumIntents = 20;
inline constexpr std::size_t kNumStickerClasses = 7;

/// Codes follow the order of the dataset's intent table.
enum class IntentLabel : std::uint8_t {
  comfort = 0,
  oppose,
  greet,
  complain,
  ask_for_help,
  taunt,
  apologize,
  introduce,
  guess,
  advise,
  compromise,
  praise,
  inform,
  flaunt,
  criticize,
  thank,
  agree,
  leave,
  query,
  joke,
};

/// People / Animal / Cartoon, with `-t` when the image carries text; `text`
/// is a text-only sticker.
enum class StickerClass : std::uint8_t { p = 0, a, c, p_t, a_t, c_t, text };

std::string_view to_string(SentimentLabel label);
std::string_view to_string(IntentLabel label);
std::string_view to_string(StickerClass label);

/// Case-insensitive, whitespace-trimmed lookup.
std::optional<SentimentLabel> parse_sentiment(std::string_view text);
std::optional<IntentLabel> parse_intent(std::string_view text);
std::optional<StickerClass> parse_sticker_class(std::string_view text);

/// True for P-t, A-t, C-t and Text.
bool sticker_class_has_text(StickerClass c);

struct ChatRecord {
  std::string id;
  std::string context;
  std::string sticker_image_ref;
  std::string sticker_text;
  SentimentLabel context_sentiment = SentimentLabel::neutral;
  SentimentLabel sticker_sentiment = SentimentLabel::neutral;
  SentimentLabel multimodal_sentiment = SentimentLabel::neutral;
  IntentLabel multimodal_intent = IntentLabel::inform;
  StickerClass sticker_class = StickerClass::c;

  bool operator==(const ChatRecord&) const = default;
};

using Dataset = std::vector<ChatRecord>;

/// Maps canonical field names to the keys used in a dataset file. Unmapped
/// fields use their canonical name.
class FieldMapping {
 public:
  static constexpr std::array<std::string_view, 9> kCanonicalFields = {
      "id",
      "context",
      "sticker_image_ref",
      "sticker_text",
      "context_sentiment",
      "sticker_sentiment",
      "multimodal_sentiment",
      "multimodal_intent",
      "sticker_class",
  };

  FieldMapping() = default;

  /// Reads a JSON object {"canonical": "file_key", ...}.
  static FieldMapping from_json_file(const std::filesystem::path& path);

  void set(std::string_view canonical, std::string file_key);
  std::string key(std::string_view canonical) const;

 private:
  std::map<std::string, std::string, std::less<>> keys_;
};

/// One violated invariant of a record.
struct Violation {
  std::string field;
  std::string message;
};

std::vector<Violation> validate_record(const ChatRecord& record);

/// Reads JSON lines. Blank lines are skipped. Throws DatasetError with the
/// 1-based line number on malformed JSON, unknown labels, invalid records or
/// duplicate ids.
Dataset load_dataset(const std::filesystem::path& path, const FieldMapping& mapping = {});
Dataset parse_dataset(std::string_view text, const FieldMapping& mapping = {});

void save_dataset(const Dataset& records, const std::filesystem::path& path, const FieldMapping& mapping = {});
std::string serialize_dataset(const Dataset& records, const FieldMapping& mapping = {});

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

inline constexpr double kDefaultTrainFraction = 0.9;
inline constexpr std::uint64_t kDefaultSplitSeed = 42;

/// Seeded shuffle, then the first round(n·f) records train.
DatasetSplit split_dataset(const Dataset& records, double train_fraction, std::uint64_t seed);

struct LabelCount {
  std::string label;
  std::size_t count = 0;
  double proportion = 0.0;
};

struct CategoryStats {
  std::string category;
  std::vector<LabelCount> labels;

  const LabelCount& at(std::string_view label) const;
};

struct StatsReport {
  std::size_t total = 0;
  /// context_sentiment, sticker_sentiment, multimodal_sentiment,
  /// multimodal_intent, sticker_class, in that order.
  std::vector<CategoryStats> categories;

  const CategoryStats& category(std::string_view name) const;
  /// JSON document with proportions rounded to 4 decimals.
  std::string to_json() const;
};

StatsReport label_statistics(const Dataset& records);

}  // namespace mmsair
