// SPDX-License-Identifier: Apache-2.0

#include "mmsair/synthetic.hpp"

#include <array>
#include <random>
#include <string>

namespace mmsair {

namespace {

constexpr std::array<const char*, 8> kFiller = {"the", "today", "really", "so", "we", "that", "okay", "hmm"};

}  // namespace

Providers SyntheticData::providers() const {
  Providers p;
  p.thumbnails = thumbnails;
  return p;
}

SyntheticData make_synthetic_dataset(std::size_t n, std::uint64_t seed, std::size_t image_side) {
  SyntheticData data;
  data.thumbnails = std::make_shared<ThumbnailSet>(image_side * image_side);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> filler(0, kFiller.size() - 1);
  std::uniform_real_distribution<double> pixel(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    ChatRecord r;
    const std::size_t s = i % kNumSentiments;
    const std::size_t intent = i % kNumIntents;
    r.id = "syn-" + std::to_string(i);
    r.context = std::string(kFiller[filler(rng)]) + " sent" + std::to_string(s) + " " + kFiller[filler(rng)] +
                " intent" + std::to_string(intent);
    r.sticker_class = static_cast<StickerClass>(i % kNumStickerClasses);
    if (sticker_class_has_text(r.sticker_class)) r.sticker_text = "caption" + std::to_string(s) + " " + kFiller[filler(rng)];
    r.sticker_image_ref = "syn/" + std::to_string(i) + ".pgm";
    r.context_sentiment = static_cast<SentimentLabel>(s);
    r.sticker_sentiment = static_cast<SentimentLabel>((s + i / kNumSentiments) % kNumSentiments);
    r.multimodal_sentiment = static_cast<SentimentLabel>(s);
    r.multimodal_intent = static_cast<IntentLabel>(intent);

    std::vector<Real> pixels(image_side * image_side);
    for (auto& p : pixels) p = static_cast<Real>(pixel(rng));
    data.thumbnails->insert(r.sticker_image_ref, std::move(pixels));
    data.records.push_back(std::move(r));
  }
  return data;
}

}  // namespace mmsair
