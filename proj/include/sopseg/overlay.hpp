#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sopseg/export.hpp"
#include "sopseg/raster.hpp"

namespace sopseg {

using Rgb = std::array<std::uint8_t, 3>;

/// Well-separated color for instance `index` (golden-angle hue walk).
Rgb instance_color(std::size_t index);

/// Alpha-blends each mask in its own color and paints mask contours opaque.
RgbImage render_overlay(const RgbImage& image, const std::vector<const Mask*>& masks, double alpha = 0.45);

/// One overlay PNG per manifest image, written as out_dir/<image id>.png.
std::vector<std::filesystem::path> visualize_manifest(const std::filesystem::path& manifest_path,
                                                      const std::filesystem::path& out_dir, double alpha = 0.45);

}  // namespace sopseg
