// Seeded synthetic scenes of rotated shapes on noisy backgrounds.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sopseg/annotations.hpp"

namespace sopseg {

enum class ShapeKind { Rectangle, Ellipse, LShape };

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

struct SynthConfig {
  int num_instances = 100;
  int image_side = 256;
  int max_objects_per_image = 4;
  double min_size = 8.0;   ///< long side of the shape, px
  double max_size = 64.0;
  double min_aspect = 0.35;  ///< short / long side
  double noise_sigma = 12.0; ///< background and object texture noise (0..255 scale)
  double min_contrast = 60.0; ///< min L1 distance between object and background colors / 3
  std::vector<ShapeKind> kinds = {ShapeKind::Rectangle, ShapeKind::Ellipse, ShapeKind::LShape};
  std::int64_t first_image_id = 1;
  std::int64_t first_instance_id = 1;
  std::string image_dir = "images";

  /// Throws ConfigError for empty or inverted ranges.
  void validate() const;
};

/// Renders `cfg.num_instances` objects spread over as many images as needed.
/// Identical (cfg, seed) pairs produce identical pixels and masks.
AnnotationSet generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

/// Minimum-area enclosing rectangle of the union of the mask's pixel squares
/// (rotating calipers over the convex hull). Throws DomainError for empty masks.
OrientedBox min_area_rect(const Mask& mask);

}  // namespace sopseg
