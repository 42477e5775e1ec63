#include "sopseg/raster.hpp"

#include <algorithm>
#include <cmath>

namespace sopseg {

namespace {

// FNV-1a over the raw bytes plus the dimensions.
std::uint64_t fnv1a(const std::uint8_t* bytes, std::size_t n, std::uint64_t h) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_dims(int w, int h) {
  const int dims[2] = {w, h};
  return fnv1a(reinterpret_cast<const std::uint8_t*>(dims), sizeof(dims), 1469598103934665603ULL);
}

struct Tap {
  int i0;
  int i1;
  float w1;
};

// Source taps for pixel-center aligned resampling along one axis.
std::vector<Tap> make_taps(double origin, double size, int out_side) {
  std::vector<Tap> taps(static_cast<std::size_t>(out_side));
  const double scale = size / out_side;
  for (int u = 0; u < out_side; ++u) {
    const double src = origin + (u + 0.5) * scale - 0.5;
    const double f = std::floor(src);
    taps[u] = {static_cast<int>(f), static_cast<int>(f) + 1, static_cast<float>(src - f)};
  }
  return taps;
}

template <typename Read>
float bilinear(const Tap& tx, const Tap& ty, Read read) {
  const float a = read(tx.i0, ty.i0) * (1.0f - tx.w1) + read(tx.i1, ty.i0) * tx.w1;
  const float b = read(tx.i0, ty.i1) * (1.0f - tx.w1) + read(tx.i1, ty.i1) * tx.w1;
  return a * (1.0f - ty.w1) + b * ty.w1;
}

}  // namespace

std::size_t Mask::area() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

std::uint64_t Mask::checksum() const { return fnv1a(data.data(), data.size(), hash_dims(width, height)); }

std::uint64_t RgbImage::checksum() const {
  return fnv1a(data.data(), data.size(), hash_dims(width, height));
}

FloatImage normalize(const RgbImage& img, const Normalization& norm) {
  FloatImage out(3, img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t* p = img.px(x, y);
      for (int c = 0; c < 3; ++c) out.at(c, x, y) = (static_cast<float>(p[c]) - norm.mean[c]) / norm.stddev[c];
    }
  }
  return out;
}

FloatImage resample_region(const FloatImage& src, double x0, double y0, double size, int out_side) {
  FloatImage out(src.channels, out_side, out_side);
  const auto tx = make_taps(x0, size, out_side);
  const auto ty = make_taps(y0, size, out_side);
  for (int c = 0; c < src.channels; ++c) {
    auto read = [&](int x, int y) -> float {
      if (x < 0 || y < 0 || x >= src.width || y >= src.height) return 0.0f;
      return src.at(c, x, y);
    };
    for (int v = 0; v < out_side; ++v) {
      for (int u = 0; u < out_side; ++u) out.at(c, u, v) = bilinear(tx[u], ty[v], read);
    }
  }
  return out;
}

Mask resample_region(const Mask& src, double x0, double y0, double size, int out_side) {
  Mask out(out_side, out_side);
  const auto tx = make_taps(x0, size, out_side);
  const auto ty = make_taps(y0, size, out_side);
  auto read = [&](int x, int y) -> float {
    if (x < 0 || y < 0 || x >= src.width || y >= src.height) return 0.0f;
    return src.at(x, y) ? 1.0f : 0.0f;
  };
  for (int v = 0; v < out_side; ++v) {
    for (int u = 0; u < out_side; ++u) out.at(u, v) = bilinear(tx[u], ty[v], read) >= 0.5f ? 1 : 0;
  }
  return out;
}

Mask flip_horizontal(const Mask& m) {
  Mask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) out.at(m.width - 1 - x, y) = m.at(x, y);
  }
  return out;
}

FloatImage flip_horizontal(const FloatImage& img) {
  FloatImage out(img.channels, img.width, img.height);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) out.at(c, img.width - 1 - x, y) = img.at(c, x, y);
    }
  }
  return out;
}

}  // namespace sopseg
