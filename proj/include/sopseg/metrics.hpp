// Instance IoU, Boundary IoU and per-class aggregation.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sopseg/raster.hpp"

namespace sopseg {

inline constexpr double kDefaultDilationRatio = 0.005;

/// |a & b| / |a | b|; 1.0 when both are empty. Throws ShapeError on mismatch.
double mask_iou(const Mask& a, const Mask& b);

/// Band width used by boundary_iou: max(1, round(ratio * diagonal)).
int boundary_band_width(int width, int height, double dilation_ratio = kDefaultDilationRatio);

/// Mask pixels within `band` (Chebyshev) of a background pixel; the area
/// outside the raster counts as background.
Mask boundary_band(const Mask& m, int band);

/// IoU of the two inner boundary bands; 1.0 when both bands are empty.
double boundary_iou(const Mask& a, const Mask& b, double dilation_ratio = kDefaultDilationRatio);

struct InstanceScore {
  std::int64_t instance_id = 0;
  std::string class_label;
  double iou = 0.0;
  double biou = 0.0;
  double predicted_iou = 0.0;
};

struct ClassStats {
  double mean_iou = 0.0;
  double mean_biou = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  std::map<std::string, ClassStats> per_class;
  double miou = 0.0;   ///< macro mean over classes
  double mbiou = 0.0;
  std::size_t instances = 0;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  /// Aligned plain-text table, one row per class plus a mean row (values in %).
  std::string to_table() const;
};

/// Class means of instance scores, then the macro mean over classes.
/// Throws DataError on an empty input.
EvalReport aggregate(const std::vector<InstanceScore>& scores);

}  // namespace sopseg
