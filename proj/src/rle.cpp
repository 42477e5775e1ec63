#include "sopseg/rle.hpp"

#include <string>

#include "sopseg/errors.hpp"

namespace sopseg {

Rle rle_encode(const Mask& mask) {
  Rle rle;
  rle.height = mask.height;
  rle.width = mask.width;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width; ++x) {
    for (int y = 0; y < mask.height; ++y) {
      const std::uint8_t v = mask.at(x, y) ? 1 : 0;
      if (v != current) {
        rle.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

Mask rle_decode(const Rle& rle) {
  if (rle.height < 0 || rle.width < 0) throw DataError("RLE has negative size");
  Mask mask(rle.width, rle.height);
  const std::uint64_t total = static_cast<std::uint64_t>(rle.width) * rle.height;
  std::uint64_t pos = 0;
  std::uint8_t value = 0;
  for (std::uint32_t run : rle.counts) {
    if (pos + run > total) throw DataError("RLE runs exceed mask size");
    for (std::uint32_t i = 0; i < run; ++i, ++pos) {
      const int x = static_cast<int>(pos / rle.height);
      const int y = static_cast<int>(pos % rle.height);
      mask.at(x, y) = value;
    }
    value ^= 1;
  }
  if (pos != total) {
    throw DataError("RLE covers " + std::to_string(pos) + " of " + std::to_string(total) + " pixels");
  }
  return mask;
}

nlohmann::json rle_to_json(const Rle& rle) {
  return {{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

Rle rle_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("size") || !j.contains("counts")) {
    throw DataError("RLE object needs 'size' and 'counts'");
  }
  const auto& size = j.at("size");
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() || !size[1].is_number_integer()) {
    throw DataError("RLE 'size' must be [height, width]");
  }
  if (!j.at("counts").is_array()) {
    throw DataError("only uncompressed RLE (integer 'counts' array) is supported");
  }
  Rle rle;
  rle.height = size[0].get<int>();
  rle.width = size[1].get<int>();
  for (const auto& c : j.at("counts")) {
    if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<long long>() >= 0)) {
      throw DataError("RLE counts must be non-negative integers");
    }
    rle.counts.push_back(c.get<std::uint32_t>());
  }
  return rle;
}

}  // namespace sopseg
