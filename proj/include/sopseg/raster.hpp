// Plain raster containers shared by data, metrics and export code.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sopseg {

/// Binary mask, row-major, values 0 or 1.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const { return width == 0 || height == 0; }
  std::size_t area() const;
  std::uint64_t checksum() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

/// 8-bit RGB image, row-major interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* px(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* px(int x, int y) const {
    return &data[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  std::uint64_t checksum() const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Channels-first float image.
struct FloatImage {
  int channels = 0;
  int width = 0;
  int height = 0;
  std::vector<float> data;

  FloatImage() = default;
  FloatImage(int c, int w, int h)
      : channels(c), width(w), height(h), data(static_cast<std::size_t>(c) * w * h, 0.0f) {}

  float& at(int ch, int x, int y) {
    return data[(static_cast<std::size_t>(ch) * height + y) * width + x];
  }
  float at(int ch, int x, int y) const {
    return data[(static_cast<std::size_t>(ch) * height + y) * width + x];
  }
};

/// Per-channel normalization applied to 0..255 pixel values.
struct Normalization {
  float mean[3] = {123.675f, 116.28f, 103.53f};
  float stddev[3] = {58.395f, 57.12f, 57.375f};
};

/// Converts to channels-first float with (v - mean) / std per channel.
FloatImage normalize(const RgbImage& img, const Normalization& norm);

/// Bilinear resampling of the square region [x0, x0 + size) x [y0, y0 + size)
/// of `src` onto an out_side x out_side grid, using pixel-center alignment so
/// output pixel u covers source interval x0 + [u, u + 1) * size / out_side.
/// Samples outside `src` read as zero.
FloatImage resample_region(const FloatImage& src, double x0, double y0, double size, int out_side);

/// Same sampling as resample_region on a binary mask, then thresholded at 0.5.
Mask resample_region(const Mask& src, double x0, double y0, double size, int out_side);

Mask flip_horizontal(const Mask& m);
FloatImage flip_horizontal(const FloatImage& img);

}  // namespace sopseg
