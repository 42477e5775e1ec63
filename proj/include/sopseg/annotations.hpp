// Instance annotation records and the JSON split file.
//
// Schema (one file per split, paths relative to the file):
//   {"images":    [{"id": 1, "path": "images/0001.png", "w": 256, "h": 256}],
//    "instances": [{"id": 7, "image_id": 1, "class": "ship",
//                   "obb": [x1, y1, x2, y2, x3, y3, x4, y4],
//                   "mask": {"size": [h, w], "counts": [...]} | "masks/7.png"}]}
// "mask" is optional for files that only carry oriented boxes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sopseg/geometry.hpp"
#include "sopseg/raster.hpp"

namespace sopseg {

struct ImageEntry {
  std::int64_t id = 0;
  std::string path;  ///< as written in the file
  int width = 0;
  int height = 0;
  std::shared_ptr<const RgbImage> pixels;
};

struct SampleRecord {
  std::int64_t instance_id = 0;
  std::int64_t image_id = 0;
  std::shared_ptr<const RgbImage> image;
  OrientedBox obox;
  Mask gt_mask;  ///< full-image mask; empty when the source has boxes only
  std::string class_label;
};

struct SkippedEntry {
  int line = 0;
  std::int64_t id = -1;
  std::string reason;
};

struct AnnotationSet {
  std::vector<ImageEntry> images;
  std::vector<SampleRecord> records;
  std::vector<SkippedEntry> skipped;  ///< only filled in lenient mode
};

enum class LoadMode { Strict, Lenient };
enum class MaskStorage { Png, Rle, None };

struct LoadOptions {
  LoadMode mode = LoadMode::Strict;
  bool require_masks = true;
  bool load_pixels = true;
};

/// Parses and validates a split file. Strict mode throws DataError naming the
/// offending line; lenient mode records bad instances in `skipped`.
AnnotationSet load_annotations(const std::filesystem::path& path, const LoadOptions& opts = {});

/// Writes the split file. Image pixels that are present are written as PNG to
/// their relative paths; PNG masks go to masks/<instance id>.png.
void save_annotations(const std::filesystem::path& path, const AnnotationSet& set, MaskStorage storage);

/// Start line (1-based) of each element of the top-level array `key`.
std::vector<int> array_element_lines(const std::string& json_text, const std::string& key);

}  // namespace sopseg
