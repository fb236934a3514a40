// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mmsair/dataset.hpp"
#include "mmsair/errors.hpp"

using namespace mmsair;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = fs::path(MMSAIR_FIXTURE_DIR) / "records.jsonl";

std::string record_line(const std::string& id, const std::string& intent = "Query",
                        const std::string& cls = "C", const std::string& text = "") {
  return R"({"id":")" + id + R"(","context":"hi","sticker_image_ref":"a.pgm","sticker_text":")" + text +
         R"(","context_sentiment":"neutral","sticker_sentiment":"neutral","multimodal_sentiment":"negative",)" +
         R"("multimodal_intent":")" + intent + R"(","sticker_class":")" + cls + R"("})";
}

Dataset numbered(std::size_t n) {
  Dataset out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = "r" + std::to_string(i);
    out[i].context = "x";
  }
  return out;
}

}  // namespace

TEST_CASE("label names parse case-insensitively and round trip") {
  CHECK(parse_sentiment(" Negative ") == SentimentLabel::negative);
  CHECK(parse_intent("ask for help") == IntentLabel::ask_for_help);
  CHECK(parse_sticker_class("c-T") == StickerClass::c_t);
  CHECK_FALSE(parse_intent("Prevent").has_value());
  for (std::size_t i = 0; i < kNumIntents; ++i) {
    const auto label = static_cast<IntentLabel>(i);
    CHECK(parse_intent(to_string(label)) == label);
  }
  CHECK(sticker_class_has_text(StickerClass::text));
  CHECK_FALSE(sticker_class_has_text(StickerClass::a));
}

TEST_CASE("fixture loads with every field populated") {
  const Dataset records = load_dataset(kFixture);
  REQUIRE(records.size() == 20);
  CHECK(records[0].id == "fx-00");
  CHECK(records[0].multimodal_intent == IntentLabel::comfort);
  CHECK(records[0].sticker_class == StickerClass::c_t);
  CHECK(records[0].sticker_text == "hug");
  CHECK(records[19].multimodal_intent == IntentLabel::joke);
  for (const auto& r : records) CHECK(validate_record(r).empty());
}

TEST_CASE("unknown label is rejected with its line number") {
  const std::string text = record_line("a") + "\n" + record_line("b", "Prevent") + "\n";
  try {
    parse_dataset(text);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("unknown label 'Prevent'") != std::string::npos);
  }
}

TEST_CASE("malformed input is reported by line") {
  CHECK_THROWS_AS(parse_dataset(record_line("a") + "\n{not json\n"), DatasetError);
  CHECK_THROWS_AS(parse_dataset(R"({"id":"x"})"), DatasetError);
  CHECK_THROWS_AS(parse_dataset(record_line("a") + "\n" + record_line("a")), DatasetError);
  CHECK_THROWS_AS(parse_dataset(record_line("a", "Query", "Text", "")), DatasetError);
  CHECK_THROWS_AS(parse_dataset(record_line("a", "Query", "P", "caption")), DatasetError);
}

TEST_CASE("empty input and blank lines") {
  CHECK(parse_dataset("").empty());
  CHECK(parse_dataset("\n  \n" + record_line("a") + "\n\n").size() == 1);
}

TEST_CASE("validation names the offending field") {
  ChatRecord r;
  r.id = "x";
  r.sticker_class = StickerClass::p_t;
  const auto v = validate_record(r);
  REQUIRE(v.size() == 2);
  CHECK(v[0].field == "context");
  CHECK(v[0].message == "empty context");
  CHECK(v[1].field == "sticker_text");
  CHECK(v[1].message.find("class/text mismatch") != std::string::npos);
}

TEST_CASE("field mapping renames keys both ways") {
  const fs::path map_path = fs::temp_directory_path() / "mmsair_field_map.json";
  {
    std::ofstream out(map_path);
    out << R"({"context": "utterance", "multimodal_intent": "intent"})";
  }
  const FieldMapping mapping = FieldMapping::from_json_file(map_path);
  CHECK(mapping.key("context") == "utterance");
  CHECK(mapping.key("id") == "id");

  const Dataset records = load_dataset(kFixture);
  const std::string text = serialize_dataset(records, mapping);
  CHECK(text.find("\"utterance\"") != std::string::npos);
  CHECK(parse_dataset(text, mapping) == records);
  CHECK_THROWS_AS(parse_dataset(text), DatasetError);

  FieldMapping bad;
  CHECK_THROWS_AS(bad.set("utterance", "x"), ConfigError);
  fs::remove(map_path);
}

TEST_CASE("save and load round trip") {
  const Dataset records = load_dataset(kFixture);
  const fs::path path = fs::temp_directory_path() / "mmsair_roundtrip.jsonl";
  save_dataset(records, path);
  CHECK(load_dataset(path) == records);
  fs::remove(path);
}

TEST_CASE("split of 10 records at 0.9") {
  const DatasetSplit s = split_dataset(numbered(10), 0.9, kDefaultSplitSeed);
  CHECK(s.train.size() == 9);
  CHECK(s.test.size() == 1);
}

TEST_CASE("split is a partition for every seed") {
  const Dataset records = numbered(37);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const DatasetSplit s = split_dataset(records, 0.7, seed);
    std::multiset<std::string> ids;
    for (const auto& r : s.train) ids.insert(r.id);
    for (const auto& r : s.test) ids.insert(r.id);
    REQUIRE(ids.size() == records.size());
    REQUIRE(std::set<std::string>(ids.begin(), ids.end()).size() == records.size());
    REQUIRE(s.train.size() == 26);
  }
}

TEST_CASE("split is deterministic and rejects degenerate requests") {
  const Dataset records = numbered(20);
  CHECK(split_dataset(records, 0.5, 7).train == split_dataset(records, 0.5, 7).train);
  CHECK_THROWS_AS(split_dataset(records, 1.0, 7), ContractError);
  CHECK_THROWS_AS(split_dataset(records, 0.0, 7), ContractError);
  CHECK_THROWS_AS(split_dataset(numbered(1), 0.5, 7), ContractError);
}

TEST_CASE("fixture statistics match its construction") {
  const StatsReport s = label_statistics(load_dataset(kFixture));
  CHECK(s.total == 20);
  const auto& mm = s.category("multimodal_sentiment");
  CHECK(mm.at("negative").count == 9);
  CHECK(mm.at("positive").count == 7);
  CHECK(mm.at("neutral").count == 4);
  CHECK(mm.at("negative").proportion == doctest::Approx(0.45));
  for (const auto& l : s.category("multimodal_intent").labels) CHECK(l.count == 1);
  const auto& cls = s.category("sticker_class");
  CHECK(cls.at("C-t").count == 6);
  CHECK(cls.at("P").count == 3);
  CHECK(cls.at("Text").count == 2);
  CHECK(s.category("context_sentiment").at("neutral").count == 6);
  CHECK(s.category("sticker_sentiment").at("positive").count == 8);
  CHECK(nlohmann::json::parse(s.to_json())["total"] == 20);
  CHECK_THROWS_AS(label_statistics({}), ContractError);
}
