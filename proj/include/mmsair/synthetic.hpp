// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>

#include "mmsair/dataset.hpp"
#include "mmsair/encoders.hpp"

namespace mmsair {

struct SyntheticData {
  Dataset records;
  std::shared_ptr<ThumbnailSet> thumbnails;

  Providers providers() const;
};

/// Linearly separable records: the context of record i carries a token unique
/// to its sentiment and one unique to its intent, with sentiment i mod 3 and
/// intent i mod 20. Sticker classes cycle through all seven styles and every
/// record gets a random `image_side`² thumbnail.
SyntheticData make_synthetic_dataset(std::size_t n, std::uint64_t seed, std::size_t image_side = 8);

}  // namespace mmsair
