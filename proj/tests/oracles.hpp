// Independent reference implementations used to cross-check the library.
// Everything here is deliberately naive: direct formulas and brute force.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "sopseg/raster.hpp"

namespace oracle {

/// Region size written straight from the piecewise definition.
inline double region_size(double d, double m = 32.0, double k0 = 2.0, double s_max = 1024.0) {
  if (d < m) return k0 * d;
  const double k = (s_max - k0 * m) / (s_max - m);
  return k * d + (k0 - k) * m;
}

inline sopseg::Mask random_mask(std::mt19937_64& rng, int w, int h, double density) {
  std::bernoulli_distribution bit(density);
  sopseg::Mask m(w, h);
  for (auto& v : m.data) v = bit(rng) ? 1 : 0;
  return m;
}

/// Union of random rectangles and discs, closer to real object masks than noise.
inline sopseg::Mask random_blob_mask(std::mt19937_64& rng, int w, int h) {
  sopseg::Mask m(w, h);
  std::uniform_int_distribution<int> count(1, 4);
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h), ur(1.0, std::max(2.0, w / 4.0));
  std::bernoulli_distribution disc(0.5);
  const int n = count(rng);
  for (int k = 0; k < n; ++k) {
    const double cx = ux(rng), cy = uy(rng), rx = ur(rng), ry = ur(rng);
    const bool round = disc(rng);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        const bool in = round ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (in) m.at(x, y) = 1;
      }
    }
  }
  return m;
}

/// |A & B| / |A | B| over explicit index sets.
inline double set_iou(const sopseg::Mask& a, const sopseg::Mask& b) {
  std::set<std::size_t> sa, sb;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if (a.data[i]) sa.insert(i);
    if (b.data[i]) sb.insert(i);
  }
  std::vector<std::size_t> inter, uni;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(uni));
  return uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

/// Chebyshev distance from a foreground pixel to the nearest background pixel,
/// counting the ring of virtual pixels just outside the raster as background.
inline int distance_to_background(const sopseg::Mask& m, int x, int y) {
  int best = std::min({x + 1, m.width - x, y + 1, m.height - y});
  for (int v = 0; v < m.height; ++v) {
    for (int u = 0; u < m.width; ++u) {
      if (!m.at(u, v)) best = std::min(best, std::max(std::abs(u - x), std::abs(v - y)));
    }
  }
  return best;
}

/// Inner boundary band: foreground pixels within `d` of background.
inline sopseg::Mask band(const sopseg::Mask& m, int d) {
  sopseg::Mask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (m.at(x, y) && distance_to_background(m, x, y) <= d) out.at(x, y) = 1;
    }
  }
  return out;
}

inline double boundary_iou(const sopseg::Mask& a, const sopseg::Mask& b, int d) {
  return set_iou(band(a, d), band(b, d));
}

/// Half-pixel bilinear resampling of a square region, evaluated pixel by
/// pixel from the four neighbouring source centers, then thresholded at 0.5.
inline sopseg::Mask resample_mask(const sopseg::Mask& m, double x0, double y0, double size, int out_side) {
  auto label = [&](int u, int v) -> double {
    return (u >= 0 && v >= 0 && u < m.width && v < m.height) ? m.at(u, v) : 0.0;
  };
  sopseg::Mask out(out_side, out_side);
  const double step = size / out_side;
  for (int v = 0; v < out_side; ++v) {
    for (int u = 0; u < out_side; ++u) {
      const double sx = x0 + (u + 0.5) * step - 0.5, sy = y0 + (v + 0.5) * step - 0.5;
      const int ix = static_cast<int>(std::floor(sx)), iy = static_cast<int>(std::floor(sy));
      const double fx = sx - ix, fy = sy - iy;
      const double val = (1 - fx) * (1 - fy) * label(ix, iy) + fx * (1 - fy) * label(ix + 1, iy) +
                         (1 - fx) * fy * label(ix, iy + 1) + fx * fy * label(ix + 1, iy + 1);
      out.at(u, v) = val >= 0.5 ? 1 : 0;
    }
  }
  return out;
}

/// Chebyshev distance from the center of pixel (x, y) to the nearest crack
/// edge, i.e. a unit pixel side separating different labels (outside = 0).
inline double crack_distance(const sopseg::Mask& m, int x, int y) {
  auto label = [&](int u, int v) {
    return (u >= 0 && v >= 0 && u < m.width && v < m.height) ? m.at(u, v) : 0;
  };
  const double px = x + 0.5, py = y + 0.5;
  double best = 1e9;
  auto interval = [](double p, double lo, double hi) { return p < lo ? lo - p : (p > hi ? p - hi : 0.0); };
  for (int v = -1; v <= m.height; ++v) {
    for (int u = -1; u <= m.width; ++u) {
      if (label(u, v) != label(u + 1, v)) {  // vertical edge at X = u + 1, Y in [v, v + 1]
        best = std::min(best, std::max(std::abs(px - (u + 1)), interval(py, v, v + 1)));
      }
      if (label(u, v) != label(u, v + 1)) {  // horizontal edge at Y = v + 1
        best = std::min(best, std::max(std::abs(py - (v + 1)), interval(px, u, u + 1)));
      }
    }
  }
  return best;
}

}  // namespace oracle
