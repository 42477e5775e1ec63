#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sopseg/errors.hpp"
#include "sopseg/geometry.hpp"

using namespace sopseg;

namespace {

constexpr double kPi = std::numbers::pi;

bool near(Point2 a, Point2 b, double tol) { return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol; }

OrientedBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-500.0, 500.0), len(0.5, 300.0), ang(-10.0, 10.0);
  return OrientedBox::make(pos(rng), pos(rng), len(rng), len(rng), ang(rng));
}

}  // namespace

TEST(RegionSize, SmallObjectDoubles) {
  RamParams p;
  EXPECT_DOUBLE_EQ(region_size(32.0 - 1e-9, p), 2.0 * (32.0 - 1e-9));
  EXPECT_DOUBLE_EQ(region_size(16.0, p), 32.0);
  EXPECT_DOUBLE_EQ(region_size(1.0, p), 2.0);
}

TEST(RegionSize, Goldens) {
  RamParams p;
  EXPECT_NEAR(region_size(32.0, p), 64.0, 1e-12);
  EXPECT_NEAR(magnification(32.0, p), 4.0, 1e-12);
  EXPECT_NEAR(region_size(1024.0, p), 1024.0, 1e-9);
  EXPECT_NEAR(region_size(512.0, p), oracle::region_size(512.0), 1e-6);
  EXPECT_NEAR(region_size(512.0, p), 528.5161290322581, 1e-9);
}

TEST(RegionSize, ContinuousAtThreshold) {
  RamParams p;
  EXPECT_NEAR(region_size(std::nextafter(32.0, 0.0), p), region_size(32.0, p), 1e-9);
}

TEST(RegionSize, MonotoneAndMatchesOracle) {
  RamParams p;
  double prev = 0.0;
  for (double d = 0.25; d <= 1024.0; d += 0.25) {
    const double s = region_size(d, p);
    EXPECT_GT(s, prev);
    EXPECT_NEAR(s, oracle::region_size(d), 1e-9 * s);
    EXPECT_GE(s, d);
    prev = s;
  }
}

TEST(RegionSize, ClampsAboveMaximum) {
  RamParams p;
  EXPECT_NEAR(region_size(4096.0, p), 1024.0, 1e-9);
}

TEST(RegionSize, RejectsNonPositive) {
  RamParams p;
  EXPECT_THROW(region_size(0.0, p), DomainError);
  EXPECT_THROW(region_size(-3.0, p), DomainError);
  EXPECT_THROW(region_size(std::nan(""), p), DomainError);
}

TEST(RamParams, Validate) {
  RamParams p;
  EXPECT_NO_THROW(p.validate());
  p.k0 = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(CropWindow, CenteredAnchor) {
  const HBox box{100.0, 40.0, 20.0, 10.0};
  const CropWindow w = crop_window(box, 64.0, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(w.size, 64.0);
  EXPECT_DOUBLE_EQ(w.x_s + 32.0, box.center().x);
  EXPECT_DOUBLE_EQ(w.y_s + 32.0, box.center().y);
}

TEST(CropWindow, AnchorExtremes) {
  const HBox box{100.0, 40.0, 20.0, 10.0};
  EXPECT_DOUBLE_EQ(crop_window(box, 64.0, 0.0, 0.0).x_s, 100.0);
  EXPECT_DOUBLE_EQ(crop_window(box, 64.0, 1.0, 1.0).x_s, 100.0 - 44.0);
  EXPECT_DOUBLE_EQ(crop_window(box, 64.0, 1.0, 1.0).y_s, 40.0 - 54.0);
  EXPECT_THROW(crop_window(box, 64.0, -0.1, 0.5), DomainError);
  EXPECT_THROW(crop_window(box, 64.0, 0.5, 1.1), DomainError);
}

TEST(CropWindow, ClampShiftsInside) {
  CropWindow w{-10.0, 250.0, 64.0};
  const CropWindow c = clamp_window(w, 256.0, 300.0);
  EXPECT_DOUBLE_EQ(c.x_s, 0.0);
  EXPECT_DOUBLE_EQ(c.y_s, 300.0 - 64.0);
  EXPECT_DOUBLE_EQ(c.pad_right + c.pad_bottom + c.pad_left + c.pad_top, 0.0);
}

TEST(CropWindow, ClampPadsWhenLargerThanImage) {
  CropWindow w{-40.0, -40.0, 300.0};
  const CropWindow c = clamp_window(w, 256.0, 200.0);
  EXPECT_DOUBLE_EQ(c.x_s, 0.0);
  EXPECT_DOUBLE_EQ(c.y_s, 0.0);
  EXPECT_DOUBLE_EQ(c.pad_right, 44.0);
  EXPECT_DOUBLE_EQ(c.pad_bottom, 100.0);
  EXPECT_DOUBLE_EQ(c.size, 300.0);
}

TEST(CropWindow, RoundOnce) {
  const CropWindow r = round_window({10.4, 10.6, 63.5});
  EXPECT_DOUBLE_EQ(r.x_s, 10.0);
  EXPECT_DOUBLE_EQ(r.y_s, 11.0);
  EXPECT_DOUBLE_EQ(r.size, 64.0);
  EXPECT_DOUBLE_EQ(round_window({0.0, 0.0, 0.2}).size, 1.0);
}

TEST(OrientedBox, MakeNormalizes) {
  const auto b = OrientedBox::make(0, 0, 4, 10, 0.0);
  EXPECT_DOUBLE_EQ(b.len_long, 10.0);
  EXPECT_DOUBLE_EQ(b.len_short, 4.0);
  EXPECT_NEAR(b.theta, kPi / 2, 1e-15);
  EXPECT_NEAR(OrientedBox::make(0, 0, 10, 4, -0.25).theta, kPi - 0.25, 1e-15);
  EXPECT_THROW(OrientedBox::make(0, 0, 0.0, 3.0, 0.0), DomainError);
  EXPECT_THROW(OrientedBox::make(0, 0, 3.0, -1.0, 0.0), DomainError);
}

TEST(OrientedBox, CornerRoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto b = random_box(rng);
    const auto r = OrientedBox::from_corners(b.corners());
    EXPECT_NEAR(r.cx, b.cx, 1e-9);
    EXPECT_NEAR(r.cy, b.cy, 1e-9);
    EXPECT_NEAR(r.len_long, b.len_long, 1e-9);
    EXPECT_NEAR(r.len_short, b.len_short, 1e-9);
    const double dtheta = std::abs(r.theta - b.theta);
    EXPECT_LT(std::min(dtheta, kPi - dtheta), 1e-9);
  }
}

TEST(OrientedBox, FromCornersAnyStartingCorner) {
  const auto b = OrientedBox::make(50, 60, 30, 10, 0.3);
  auto c = b.corners();
  std::rotate(c.begin(), c.begin() + 1, c.end());
  const auto r = OrientedBox::from_corners(c);
  EXPECT_NEAR(r.len_long, 30.0, 1e-9);
  EXPECT_NEAR(r.len_short, 10.0, 1e-9);
  EXPECT_NEAR(r.theta, 0.3, 1e-9);
}

TEST(OrientedPrompts, AxisAligned) {
  const auto b = OrientedBox::make(10.0, 20.0, 8.0, 2.0, 0.0);
  const auto p = oriented_prompts(b);
  EXPECT_TRUE(near(p.c, {10.0, 20.0}, 1e-12));
  EXPECT_TRUE(near(p.p1, {8.0, 20.0}, 1e-12) || near(p.p1, {12.0, 20.0}, 1e-12));
  EXPECT_NEAR(distance(p.p1, p.p2), 4.0, 1e-12);
}

TEST(OrientedPrompts, SquareEnvelopeMatchesCorners) {
  const auto b = OrientedBox::make(5.0, 5.0, 4.0, 4.0, 0.0);
  const HBox env = horizontal_envelope(b);
  EXPECT_NEAR(env.x, 3.0, 1e-12);
  EXPECT_NEAR(env.y, 3.0, 1e-12);
  EXPECT_NEAR(env.w, 4.0, 1e-12);
  EXPECT_NEAR(env.h, 4.0, 1e-12);
}

TEST(OrientedPrompts, Properties) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(-7.0, 7.0), shift(-100.0, 100.0), scale(0.1, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const auto b = random_box(rng);
    const auto p = oriented_prompts(b);
    const Point2 u = p.p1 - p.c, v = p.p2 - p.c;
    EXPECT_NEAR(u.x * v.y - u.y * v.x, 0.0, 1e-6);
    EXPECT_NEAR(distance(p.p1, p.p2), b.len_long / 2.0, 1e-6);
    EXPECT_TRUE(b.contains_strictly(p.p1) && b.contains_strictly(p.c) && b.contains_strictly(p.p2));

    const Point2 pivot{shift(rng), shift(rng)};
    const double a = ang(rng);
    const auto pr = oriented_prompts(b.rotated(a, pivot));
    const Point2 q1 = rotate_about(p.p1, pivot, a), q2 = rotate_about(p.p2, pivot, a);
    EXPECT_TRUE(near(pr.c, rotate_about(p.c, pivot, a), 1e-6));
    EXPECT_TRUE((near(pr.p1, q1, 1e-6) && near(pr.p2, q2, 1e-6)) ||
                (near(pr.p1, q2, 1e-6) && near(pr.p2, q1, 1e-6)));

    const double dx = shift(rng), dy = shift(rng);
    const auto pt = oriented_prompts(b.translated(dx, dy));
    EXPECT_TRUE(near(pt.p1, p.p1 + Point2{dx, dy}, 1e-6));
    EXPECT_TRUE(near(pt.p2, p.p2 + Point2{dx, dy}, 1e-6));

    const double s = scale(rng);
    const auto ps = oriented_prompts(b.scaled(s, pivot));
    EXPECT_TRUE(near(ps.p1, pivot + s * (p.p1 - pivot), 1e-6 * std::max(1.0, s * 500)));
    EXPECT_TRUE(near(ps.p2, pivot + s * (p.p2 - pivot), 1e-6 * std::max(1.0, s * 500)));
  }
}

TEST(CropCoords, RoundTripAndScale) {
  const CropWindow w{10.0, 20.0, 64.0};
  const Point2 p{42.0, 36.0};
  const Point2 c = to_crop_coords(p, w, 256);
  EXPECT_DOUBLE_EQ(c.x, 128.0);
  EXPECT_DOUBLE_EQ(c.y, 64.0);
  EXPECT_TRUE(near(from_crop_coords(c, w, 256), p, 1e-12));
  const HBox b = to_crop_coords(HBox{10.0, 20.0, 16.0, 8.0}, w, 256);
  EXPECT_DOUBLE_EQ(b.w, 64.0);
  EXPECT_DOUBLE_EQ(b.h, 32.0);
}

TEST(CropCoords, PromptsInsideEnvelope) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto b = random_box(rng);
    const HBox env = horizontal_envelope(b);
    const double s = region_size(std::max(env.w, env.h), RamParams{});
    const CropWindow w = crop_window(env, s, 0.5, 0.5);
    const auto bundle = to_crop_coords(PromptBundle{env, oriented_prompts(b)}, w, 256);
    for (const Point2& q : {bundle.points.p1, bundle.points.c, bundle.points.p2}) {
      EXPECT_GE(q.x, bundle.box.x - 1e-9);
      EXPECT_LE(q.x, bundle.box.right() + 1e-9);
      EXPECT_GE(q.y, bundle.box.y - 1e-9);
      EXPECT_LE(q.y, bundle.box.bottom() + 1e-9);
    }
  }
}
