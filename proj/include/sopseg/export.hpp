// Writing predicted instance masks back in original image coordinates.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sopseg/geometry.hpp"
#include "sopseg/raster.hpp"

namespace sopseg {

enum class MaskFormat { Png, Rle };

MaskFormat mask_format_from_string(const std::string& s);
std::string to_string(MaskFormat f);

struct InstanceResult {
  std::int64_t instance_id = 0;
  std::int64_t image_id = 0;
  std::string class_label;
  double p_iou = 0.0;
  Mask crop_mask;     ///< s_in x s_in prediction
  CropWindow window;  ///< integer crop window it came from
  int image_width = 0;
  int image_height = 0;
};

struct ManifestImage {
  std::int64_t id = 0;
  std::string path;  ///< absolute, or relative to the manifest directory
  int width = 0;
  int height = 0;
};

struct ManifestInstance {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::string class_label;
  double p_iou = 0.0;
  Mask mask;  ///< full image
};

struct Manifest {
  MaskFormat format = MaskFormat::Png;
  std::vector<ManifestImage> images;
  std::vector<ManifestInstance> instances;
};

/// Back-projects every result, writes masks (PNG files under dir/masks or
/// inline RLE) and dir/manifest.json. Returns the manifest path.
std::filesystem::path export_masks(const std::vector<InstanceResult>& results,
                                   const std::vector<ManifestImage>& images, const std::filesystem::path& dir,
                                   MaskFormat format);

/// Reads a manifest and decodes every mask. Throws DataError on malformed input.
Manifest load_manifest(const std::filesystem::path& manifest_path);

}  // namespace sopseg
