#include "sopseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sopseg/errors.hpp"

namespace sopseg {

namespace {
constexpr double kPi = std::numbers::pi;
}

Point2 rotate_about(Point2 p, Point2 pivot, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double dx = p.x - pivot.x;
  const double dy = p.y - pivot.y;
  return {pivot.x + c * dx - s * dy, pivot.y + s * dx + c * dy};
}

void RamParams::validate() const {
  if (!(m > 0.0)) throw ConfigError("ram.m must be positive");
  if (!(k0 > 1.0)) throw ConfigError("ram.k0 must exceed 1");
  if (!(s_max > k0 * m)) throw ConfigError("ram.s_max must exceed k0 * m");
  if (s_in <= 0) throw ConfigError("ram.s_in must be positive");
}

double normalize_half_turn(double angle) {
  double a = std::fmod(angle, kPi);
  if (a < 0.0) a += kPi;
  // fmod can return exactly pi after the shift for tiny negative inputs
  if (a >= kPi) a -= kPi;
  return a;
}

OrientedBox OrientedBox::make(double cx, double cy, double side_a, double side_b, double angle) {
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(angle)) {
    throw DomainError("oriented box has non-finite center or angle");
  }
  if (!(side_a > 0.0) || !(side_b > 0.0) || !std::isfinite(side_a) || !std::isfinite(side_b)) {
    throw DomainError("oriented box sides must be positive, got " + std::to_string(side_a) + " x " +
                      std::to_string(side_b));
  }
  OrientedBox box;
  box.cx = cx;
  box.cy = cy;
  if (side_a >= side_b) {
    box.len_long = side_a;
    box.len_short = side_b;
    box.theta = normalize_half_turn(angle);
  } else {
    box.len_long = side_b;
    box.len_short = side_a;
    box.theta = normalize_half_turn(angle + 0.5 * kPi);
  }
  return box;
}

std::array<Point2, 4> OrientedBox::corners() const {
  const Point2 u = axis();
  const Point2 v{-u.y, u.x};
  const Point2 c = center();
  const double hl = 0.5 * len_long;
  const double hs = 0.5 * len_short;
  return {c - hl * u - hs * v, c + hl * u - hs * v, c + hl * u + hs * v, c - hl * u + hs * v};
}

OrientedBox OrientedBox::from_corners(const std::array<Point2, 4>& c) {
  const Point2 center = 0.25 * (c[0] + c[1] + c[2] + c[3]);
  const Point2 e01 = 0.5 * ((c[1] - c[0]) + (c[2] - c[3]));
  const Point2 e12 = 0.5 * ((c[2] - c[1]) + (c[3] - c[0]));
  const double len01 = std::hypot(e01.x, e01.y);
  const double len12 = std::hypot(e12.x, e12.y);
  if (!(len01 > 0.0) || !(len12 > 0.0)) throw DomainError("degenerate oriented box corners");
  if (len01 >= len12) {
    return make(center.x, center.y, len01, len12, std::atan2(e01.y, e01.x));
  }
  return make(center.x, center.y, len12, len01, std::atan2(e12.y, e12.x));
}

OrientedBox OrientedBox::translated(double dx, double dy) const {
  OrientedBox b = *this;
  b.cx += dx;
  b.cy += dy;
  return b;
}

OrientedBox OrientedBox::scaled(double factor, Point2 pivot) const {
  if (!(factor > 0.0)) throw DomainError("scale factor must be positive");
  const Point2 c = pivot + factor * (center() - pivot);
  OrientedBox b = *this;
  b.cx = c.x;
  b.cy = c.y;
  b.len_long *= factor;
  b.len_short *= factor;
  return b;
}

OrientedBox OrientedBox::rotated(double angle, Point2 pivot) const {
  const Point2 c = rotate_about(center(), pivot, angle);
  OrientedBox b = *this;
  b.cx = c.x;
  b.cy = c.y;
  b.theta = normalize_half_turn(theta + angle);
  return b;
}

bool OrientedBox::contains_strictly(Point2 p, double margin) const {
  const Point2 d = p - center();
  const Point2 u = axis();
  const double along = d.x * u.x + d.y * u.y;
  const double across = -d.x * u.y + d.y * u.x;
  return std::abs(along) < 0.5 * len_long - margin && std::abs(across) < 0.5 * len_short - margin;
}

double region_size(double d, const RamParams& params) {
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw DomainError("region_size needs a positive object size, got " + std::to_string(d));
  }
  if (d < params.m) return params.k0 * d;
  // Beyond s_max the linear branch is an extrapolation; hold the region at s_max.
  const double dd = std::min(d, params.s_max);
  const double k = params.slope();
  return k * dd + (params.k0 - k) * params.m;
}

double magnification(double d, const RamParams& params) {
  return static_cast<double>(params.s_in) / region_size(d, params);
}

CropWindow crop_window(const HBox& box, double size, double a_x, double a_y) {
  if (!(a_x >= 0.0 && a_x <= 1.0) || !(a_y >= 0.0 && a_y <= 1.0)) {
    throw DomainError("crop anchor must lie in [0, 1]");
  }
  if (!(size > 0.0)) throw DomainError("crop size must be positive");
  CropWindow win;
  win.x_s = box.x - a_x * (size - box.w);
  win.y_s = box.y - a_y * (size - box.h);
  win.size = size;
  return win;
}

namespace {

struct AxisPlacement {
  double pos;
  double pad_after;
};

AxisPlacement clamp_axis(double pos, double size, double extent) {
  if (size >= extent) return {0.0, size - extent};
  return {std::clamp(pos, 0.0, extent - size), 0.0};
}

}  // namespace

CropWindow clamp_window(const CropWindow& win, double img_w, double img_h) {
  const AxisPlacement ax = clamp_axis(win.x_s, win.size, img_w);
  const AxisPlacement ay = clamp_axis(win.y_s, win.size, img_h);
  CropWindow out = win;
  out.x_s = ax.pos;
  out.y_s = ay.pos;
  out.pad_left = 0.0;
  out.pad_top = 0.0;
  out.pad_right = ax.pad_after;
  out.pad_bottom = ay.pad_after;
  return out;
}

CropWindow round_window(const CropWindow& win) {
  CropWindow out;
  out.x_s = std::round(win.x_s);
  out.y_s = std::round(win.y_s);
  out.size = std::max(1.0, std::round(win.size));
  return out;
}

PromptPoints oriented_prompts(const OrientedBox& obox) {
  const Point2 c = obox.center();
  const Point2 u = obox.axis();
  const Point2 c1 = c - (0.5 * obox.len_long) * u;
  const Point2 c2 = c + (0.5 * obox.len_long) * u;
  return {0.5 * (c + c1), c, 0.5 * (c + c2)};
}

HBox horizontal_envelope(const OrientedBox& obox) {
  const auto pts = obox.corners();
  double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
  for (const Point2& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

Point2 to_crop_coords(Point2 p, const CropWindow& win, int s_in) {
  const double scale = s_in / win.size;
  return {(p.x - win.x_s) * scale, (p.y - win.y_s) * scale};
}

HBox to_crop_coords(const HBox& b, const CropWindow& win, int s_in) {
  const double scale = s_in / win.size;
  const Point2 tl = to_crop_coords(Point2{b.x, b.y}, win, s_in);
  return {tl.x, tl.y, b.w * scale, b.h * scale};
}

PromptPoints to_crop_coords(const PromptPoints& pts, const CropWindow& win, int s_in) {
  return {to_crop_coords(pts.p1, win, s_in), to_crop_coords(pts.c, win, s_in),
          to_crop_coords(pts.p2, win, s_in)};
}

PromptBundle to_crop_coords(const PromptBundle& bundle, const CropWindow& win, int s_in) {
  return {to_crop_coords(bundle.box, win, s_in), to_crop_coords(bundle.points, win, s_in)};
}

Point2 from_crop_coords(Point2 p, const CropWindow& win, int s_in) {
  const double scale = win.size / s_in;
  return {p.x * scale + win.x_s, p.y * scale + win.y_s};
}

HBox from_crop_coords(const HBox& b, const CropWindow& win, int s_in) {
  const double scale = win.size / s_in;
  const Point2 tl = from_crop_coords(Point2{b.x, b.y}, win, s_in);
  return {tl.x, tl.y, b.w * scale, b.h * scale};
}

PromptPoints from_crop_coords(const PromptPoints& pts, const CropWindow& win, int s_in) {
  return {from_crop_coords(pts.p1, win, s_in), from_crop_coords(pts.c, win, s_in),
          from_crop_coords(pts.p2, win, s_in)};
}

}  // namespace sopseg
