// Learned positional-embedding grids and their resampling to new input sizes.

#pragma once

#include <cstddef>
#include <vector>

namespace sopseg {

inline constexpr int kPatchStride = 16;

/// (side, side, channels) grid, channels fastest.
struct PeGrid {
  int side = 0;
  int channels = 0;
  int source_side = 0;  ///< input side in pixels the grid corresponds to
  std::vector<double> values;

  double at(int i, int j, int c) const {
    return values[(static_cast<std::size_t>(i) * side + j) * channels + c];
  }
  double& at(int i, int j, int c) { return values[(static_cast<std::size_t>(i) * side + j) * channels + c]; }
};

/// Bilinear resampling with aligned corners: output index u samples source
/// position u * (side - 1) / (out_side - 1). Returns the input unchanged when
/// the target matches. Throws ConfigError when target_side is not a multiple
/// of the patch stride.
PeGrid interpolate_pe(const PeGrid& pe, int target_side);

}  // namespace sopseg
