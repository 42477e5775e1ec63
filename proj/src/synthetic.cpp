#include "sopseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "sopseg/errors.hpp"

namespace sopseg {

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Rectangle:
      return "rectangle";
    case ShapeKind::Ellipse:
      return "ellipse";
    case ShapeKind::LShape:
      return "l_shape";
  }
  return "unknown";
}

ShapeKind shape_kind_from_string(const std::string& name) {
  if (name == "rectangle") return ShapeKind::Rectangle;
  if (name == "ellipse") return ShapeKind::Ellipse;
  if (name == "l_shape") return ShapeKind::LShape;
  throw ConfigError("unknown shape kind '" + name + "'");
}

void SynthConfig::validate() const {
  if (num_instances <= 0) throw ConfigError("synth: num_instances must be positive");
  if (image_side < 16) throw ConfigError("synth: image_side must be at least 16");
  if (max_objects_per_image <= 0) throw ConfigError("synth: max_objects_per_image must be positive");
  if (!(min_size >= 2.0) || !(max_size >= min_size)) throw ConfigError("synth: need 2 <= min_size <= max_size");
  if (max_size * 1.5 + 8 > image_side) throw ConfigError("synth: max_size too large for image_side");
  if (!(min_aspect > 0.0 && min_aspect <= 1.0)) throw ConfigError("synth: min_aspect must be in (0, 1]");
  if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be non-negative");
  if (kinds.empty()) throw ConfigError("synth: no shape kinds selected");
}

namespace {

double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

struct Shape {
  ShapeKind kind;
  double cx, cy, len_long, len_short, theta;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double u = dx * std::cos(theta) + dy * std::sin(theta);
    const double v = -dx * std::sin(theta) + dy * std::cos(theta);
    const double hl = 0.5 * len_long;
    const double hs = 0.5 * len_short;
    switch (kind) {
      case ShapeKind::Rectangle:
        return std::abs(u) <= hl && std::abs(v) <= hs;
      case ShapeKind::Ellipse:
        return (u * u) / (hl * hl) + (v * v) / (hs * hs) <= 1.0;
      case ShapeKind::LShape:
        return std::abs(u) <= hl && std::abs(v) <= hs && (u <= -hl + 0.45 * len_long || v <= -hs + 0.5 * len_short);
    }
    return false;
  }

  double radius() const { return 0.5 * std::hypot(len_long, len_short); }
};

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

OrientedBox min_area_rect(const Mask& mask) {
  std::vector<Point2> pts;
  for (int y = 0; y < mask.height; ++y) {
    int x0 = -1, x1 = -1;
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) {
        if (x0 < 0) x0 = x;
        x1 = x;
      }
    }
    if (x0 < 0) continue;
    pts.push_back({double(x0), double(y)});
    pts.push_back({double(x0), double(y + 1)});
    pts.push_back({double(x1 + 1), double(y)});
    pts.push_back({double(x1 + 1), double(y + 1)});
  }
  if (pts.empty()) throw DomainError("min_area_rect of an empty mask");
  const std::vector<Point2> hull = convex_hull(pts);

  double best_area = std::numeric_limits<double>::infinity();
  OrientedBox best;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2 e = hull[(i + 1) % hull.size()] - hull[i];
    const double len = std::hypot(e.x, e.y);
    if (len == 0.0) continue;
    const Point2 u{e.x / len, e.y / len};
    const Point2 v{-u.y, u.x};
    double a0 = 1e300, a1 = -1e300, b0 = 1e300, b1 = -1e300;
    for (const Point2& p : hull) {
      const double a = p.x * u.x + p.y * u.y;
      const double b = p.x * v.x + p.y * v.y;
      a0 = std::min(a0, a);
      a1 = std::max(a1, a);
      b0 = std::min(b0, b);
      b1 = std::max(b1, b);
    }
    const double area = (a1 - a0) * (b1 - b0);
    if (area < best_area - 1e-9) {
      best_area = area;
      const double am = 0.5 * (a0 + a1);
      const double bm = 0.5 * (b0 + b1);
      const Point2 c = am * u + bm * v;
      best = OrientedBox::make(c.x, c.y, a1 - a0, b1 - b0, std::atan2(u.y, u.x));
    }
  }
  return best;
}

AnnotationSet generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int side = cfg.image_side;

  AnnotationSet set;
  std::int64_t image_id = cfg.first_image_id;
  std::int64_t instance_id = cfg.first_instance_id;
  int remaining = cfg.num_instances;

  while (remaining > 0) {
    const int wanted = std::min(remaining, 1 + static_cast<int>(unit(rng) * cfg.max_objects_per_image));
    std::vector<Shape> shapes;
    for (int attempt = 0; attempt < 200 && static_cast<int>(shapes.size()) < wanted; ++attempt) {
      Shape s;
      s.kind = cfg.kinds[static_cast<std::size_t>(unit(rng) * cfg.kinds.size()) % cfg.kinds.size()];
      s.len_long = cfg.min_size + unit(rng) * (cfg.max_size - cfg.min_size);
      s.len_short = std::max(3.0, s.len_long * (cfg.min_aspect + unit(rng) * (1.0 - cfg.min_aspect)));
      s.len_short = std::min(s.len_short, s.len_long);
      s.theta = unit(rng) * std::numbers::pi;
      const double r = s.radius() + 2.0;
      s.cx = r + unit(rng) * (side - 2.0 * r);
      s.cy = r + unit(rng) * (side - 2.0 * r);
      const bool clear = std::none_of(shapes.begin(), shapes.end(), [&](const Shape& o) {
        return std::hypot(o.cx - s.cx, o.cy - s.cy) < r + o.radius() + 2.0;
      });
      if (clear) shapes.push_back(s);
    }

    auto img = std::make_shared<RgbImage>(side, side);
    double bg[3];
    for (double& c : bg) c = 30.0 + unit(rng) * 195.0;
    // Gentle linear shading across the scene.
    const double gx = (unit(rng) - 0.5) * 40.0 / side;
    const double gy = (unit(rng) - 0.5) * 40.0 / side;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double shade = gx * (x - side / 2) + gy * (y - side / 2);
        std::uint8_t* p = img->px(x, y);
        for (int c = 0; c < 3; ++c) p[c] = clamp_byte(bg[c] + shade + cfg.noise_sigma * noise(rng));
      }
    }

    std::vector<SampleRecord> recs;
    for (const Shape& s : shapes) {
      double fg[3];
      for (int tries = 0;; ++tries) {
        for (double& c : fg) c = 10.0 + unit(rng) * 235.0;
        const double diff = (std::abs(fg[0] - bg[0]) + std::abs(fg[1] - bg[1]) + std::abs(fg[2] - bg[2])) / 3.0;
        if (diff >= cfg.min_contrast || tries > 100) break;
      }
      Mask mask(side, side);
      const int x0 = std::max(0, static_cast<int>(s.cx - s.radius()) - 1);
      const int x1 = std::min(side - 1, static_cast<int>(s.cx + s.radius()) + 1);
      const int y0 = std::max(0, static_cast<int>(s.cy - s.radius()) - 1);
      const int y1 = std::min(side - 1, static_cast<int>(s.cy + s.radius()) + 1);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (!s.contains(x + 0.5, y + 0.5)) continue;
          mask.at(x, y) = 1;
          std::uint8_t* p = img->px(x, y);
          for (int c = 0; c < 3; ++c) p[c] = clamp_byte(fg[c] + 0.5 * cfg.noise_sigma * noise(rng));
        }
      }
      if (mask.area() == 0) continue;
      SampleRecord rec;
      rec.instance_id = instance_id++;
      rec.image_id = image_id;
      rec.image = img;
      rec.obox = min_area_rect(mask);
      rec.gt_mask = std::move(mask);
      rec.class_label = to_string(s.kind);
      recs.push_back(std::move(rec));
    }
    if (recs.empty()) continue;

    std::ostringstream name;
    name << cfg.image_dir << "/" << std::setw(6) << std::setfill('0') << image_id << ".png";
    ImageEntry entry{image_id, name.str(), side, side, img};
    set.images.push_back(std::move(entry));
    remaining -= static_cast<int>(recs.size());
    for (auto& r : recs) set.records.push_back(std::move(r));
    ++image_id;
  }
  return set;
}

}  // namespace sopseg
