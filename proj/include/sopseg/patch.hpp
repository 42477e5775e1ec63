// Region-adaptive crop extraction: turns an instance record into a network-ready patch.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "sopseg/annotations.hpp"
#include "sopseg/geometry.hpp"
#include "sopseg/raster.hpp"

namespace sopseg {

enum class PatchMode { Train, Eval };

struct PatchSample {
  std::int64_t instance_id = 0;
  std::int64_t image_id = 0;
  std::string class_label;
  FloatImage patch;      ///< 3 x s_in x s_in, normalized, zero outside the image
  PromptBundle prompt;   ///< crop coordinates
  Mask gt_mask_patch;    ///< s_in x s_in; empty when the record has no mask
  CropWindow window;     ///< integer window in image coordinates, for back-projection
  int image_width = 0;
  int image_height = 0;
  bool flipped = false;
};

struct PatchOptions {
  RamParams ram;
  Normalization norm;
  double jitter_lo = 0.3;  ///< train-mode anchor range
  double jitter_hi = 0.7;
  bool hflip = false;      ///< random horizontal flip in train mode
};

/// Crops, pads and resizes the region around `rec`. Train mode draws the
/// anchor (a_x, a_y) from [jitter_lo, jitter_hi] with `rng`; eval mode uses 0.5.
/// Returns nullopt (and leaves rng untouched) for objects under 1 px.
std::optional<PatchSample> build_patch_sample(const SampleRecord& rec, const PatchOptions& opts, PatchMode mode,
                                              std::mt19937_64& rng);

/// Maps a crop-space mask back onto the full image with nearest-neighbor
/// sampling; pixels outside the window are 0.
Mask back_project(const Mask& crop_mask, const CropWindow& win, int image_width, int image_height);

}  // namespace sopseg
