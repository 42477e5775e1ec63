// Closed-form spatial math for region-adaptive cropping and oriented prompts.
//
// All coordinates are continuous pixel coordinates: the pixel (i, j) covers
// [j, j + 1) x [i, i + 1), so its center sits at (j + 0.5, i + 0.5).

#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace sopseg {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Rotates `p` about `pivot` by `angle` radians (counter-clockwise in a y-up frame).
Point2 rotate_about(Point2 p, Point2 pivot, double angle);

/// Region-adaptive magnification parameters.
struct RamParams {
  double m = 32.0;        ///< size threshold (px)
  double k0 = 2.0;        ///< expand factor for objects below the threshold
  double s_max = 1024.0;  ///< region size reached at d == s_max
  int s_in = 256;         ///< network input side (px)

  /// Throws ConfigError unless m > 0, k0 > 1, s_max > k0 * m and s_in > 0.
  void validate() const;

  /// Slope of the linear branch; makes region_size(s_max) == s_max.
  double slope() const { return (s_max - k0 * m) / (s_max - m); }
};

/// Axis-aligned box: top-left corner plus extent.
struct HBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  Point2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
  friend bool operator==(const HBox&, const HBox&) = default;
};

/// Rotated rectangle. `theta` is the direction of the long axis, in [0, pi).
struct OrientedBox {
  double cx = 0.0;
  double cy = 0.0;
  double len_long = 0.0;
  double len_short = 0.0;
  double theta = 0.0;

  /// Builds a normalized box from two side lengths in any order.
  /// `side_a` runs along `angle`; when side_b is longer the angle turns by pi/2.
  /// Throws DomainError on non-positive or non-finite sizes.
  static OrientedBox make(double cx, double cy, double side_a, double side_b, double angle);

  /// Corners in order: the first edge (c0 -> c1) runs along the long axis.
  std::array<Point2, 4> corners() const;

  /// Recovers the box from four corners in polygon order. Opposite edges are
  /// averaged so slightly non-rectangular quads are accepted. Equal side
  /// lengths keep the c0 -> c1 edge as the long axis.
  static OrientedBox from_corners(const std::array<Point2, 4>& c);

  Point2 center() const { return {cx, cy}; }
  Point2 axis() const { return {std::cos(theta), std::sin(theta)}; }

  OrientedBox translated(double dx, double dy) const;
  OrientedBox scaled(double factor, Point2 pivot) const;
  OrientedBox rotated(double angle, Point2 pivot) const;

  /// True when `p` is strictly inside the rectangle, by at least `margin`.
  bool contains_strictly(Point2 p, double margin = 0.0) const;
};

/// Wraps an angle into [0, pi).
double normalize_half_turn(double angle);

/// Square crop region. `x_s`, `y_s` may be fractional until rasterized.
struct CropWindow {
  double x_s = 0.0;
  double y_s = 0.0;
  double size = 0.0;
  double pad_left = 0.0;
  double pad_top = 0.0;
  double pad_right = 0.0;
  double pad_bottom = 0.0;

  friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

struct PromptPoints {
  Point2 p1;
  Point2 c;
  Point2 p2;
};

/// Horizontal envelope box and oriented points, both in one coordinate frame.
struct PromptBundle {
  HBox box;
  PromptPoints points;
};

/// Side of the square region extracted around an object of size `d`.
/// Objects above s_max are clamped to s_max. Throws DomainError for d <= 0.
double region_size(double d, const RamParams& params);

/// s_in / region_size(d).
double magnification(double d, const RamParams& params);

/// Places a window of side `size` so the box sits at fraction (a_x, a_y) of the slack.
/// Throws DomainError when a_x or a_y lies outside [0, 1].
CropWindow crop_window(const HBox& box, double size, double a_x, double a_y);

/// Shifts the window inside the image; axes the window cannot fit are pinned
/// at 0 and the overhang is recorded as right/bottom padding.
CropWindow clamp_window(const CropWindow& win, double img_w, double img_h);

/// Rounds position and size to the nearest integer (size at least 1), pads reset.
CropWindow round_window(const CropWindow& win);

/// P1, C, P2 along the principal axis.
PromptPoints oriented_prompts(const OrientedBox& obox);

/// Tightest axis-aligned box around the four corners.
HBox horizontal_envelope(const OrientedBox& obox);

Point2 to_crop_coords(Point2 p, const CropWindow& win, int s_in);
HBox to_crop_coords(const HBox& b, const CropWindow& win, int s_in);
PromptPoints to_crop_coords(const PromptPoints& pts, const CropWindow& win, int s_in);
PromptBundle to_crop_coords(const PromptBundle& bundle, const CropWindow& win, int s_in);

Point2 from_crop_coords(Point2 p, const CropWindow& win, int s_in);
HBox from_crop_coords(const HBox& b, const CropWindow& win, int s_in);
PromptPoints from_crop_coords(const PromptPoints& pts, const CropWindow& win, int s_in);

}  // namespace sopseg
