#pragma once

#include <filesystem>

#include "sopseg/raster.hpp"

namespace sopseg {

/// Reads an 8-bit PNG as RGB. Gray and alpha variants are converted.
/// Throws DataError on missing or undecodable files.
RgbImage read_png_rgb(const std::filesystem::path& path);

/// Reads an 8-bit PNG mask; any non-zero gray value becomes 1.
Mask read_png_mask(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& img);

/// Writes 0/255 8-bit grayscale.
void write_png(const std::filesystem::path& path, const Mask& mask);

}  // namespace sopseg
