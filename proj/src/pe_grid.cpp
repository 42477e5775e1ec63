#include "sopseg/pe_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sopseg/errors.hpp"

namespace sopseg {

namespace {

struct Tap {
  int i0;
  int i1;
  double w1;
};

Tap aligned_tap(int u, int out_side, int in_side) {
  if (out_side == 1 || in_side == 1) return {0, 0, 0.0};
  const double src = static_cast<double>(u) * (in_side - 1) / (out_side - 1);
  const int i0 = std::min(static_cast<int>(std::floor(src)), in_side - 1);
  const int i1 = std::min(i0 + 1, in_side - 1);
  return {i0, i1, src - i0};
}

}  // namespace

PeGrid interpolate_pe(const PeGrid& pe, int target_side) {
  if (target_side <= 0 || target_side % kPatchStride != 0) {
    throw ConfigError("input side " + std::to_string(target_side) + " is not a positive multiple of " +
                      std::to_string(kPatchStride));
  }
  if (target_side == pe.source_side) return pe;
  const int out = target_side / kPatchStride;
  PeGrid res;
  res.side = out;
  res.channels = pe.channels;
  res.source_side = target_side;
  res.values.assign(static_cast<std::size_t>(out) * out * pe.channels, 0.0);
  for (int i = 0; i < out; ++i) {
    const Tap ti = aligned_tap(i, out, pe.side);
    for (int j = 0; j < out; ++j) {
      const Tap tj = aligned_tap(j, out, pe.side);
      for (int c = 0; c < pe.channels; ++c) {
        const double top = pe.at(ti.i0, tj.i0, c) * (1.0 - tj.w1) + pe.at(ti.i0, tj.i1, c) * tj.w1;
        const double bot = pe.at(ti.i1, tj.i0, c) * (1.0 - tj.w1) + pe.at(ti.i1, tj.i1, c) * tj.w1;
        res.at(i, j, c) = top * (1.0 - ti.w1) + bot * ti.w1;
      }
    }
  }
  return res;
}

}  // namespace sopseg
