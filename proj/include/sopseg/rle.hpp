// Uncompressed COCO-style run-length encoding.
//
// Runs are taken in column-major order and alternate background/foreground,
// starting with background (a mask beginning with foreground has a leading 0).

#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "sopseg/raster.hpp"

namespace sopseg {

struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const Rle&, const Rle&) = default;
};

Rle rle_encode(const Mask& mask);

/// Throws DataError when the runs do not cover exactly height * width pixels.
Mask rle_decode(const Rle& rle);

/// {"size": [h, w], "counts": [...]}
nlohmann::json rle_to_json(const Rle& rle);
Rle rle_from_json(const nlohmann::json& j);

}  // namespace sopseg
