#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "sopseg/errors.hpp"
#include "sopseg/png_io.hpp"
#include "sopseg/raster.hpp"
#include "sopseg/rle.hpp"

using namespace sopseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sopseg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Rle, KnownCounts) {
  Mask m(3, 2);  // column-major: (0,0) (0,1) (1,0) (1,1) (2,0) (2,1)
  m.at(1, 0) = 1;
  m.at(1, 1) = 1;
  m.at(2, 1) = 1;
  const Rle r = rle_encode(m);
  EXPECT_EQ(r.height, 2);
  EXPECT_EQ(r.width, 3);
  EXPECT_EQ(r.counts, (std::vector<std::uint32_t>{2, 2, 1, 1}));
}

TEST(Rle, LeadingForegroundHasZeroRun) {
  Mask m(2, 2);
  m.at(0, 0) = 1;
  EXPECT_EQ(rle_encode(m).counts, (std::vector<std::uint32_t>{0, 1, 3}));
}

TEST(Rle, RandomRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> side(1, 40);
  for (int i = 0; i < 100; ++i) {
    const Mask m = oracle::random_mask(rng, side(rng), side(rng), 0.4);
    const Rle r = rle_encode(m);
    EXPECT_EQ(rle_decode(r), m);
    EXPECT_EQ(rle_from_json(rle_to_json(r)), r);
  }
}

TEST(Rle, RejectsBadCoverage) {
  Rle r{2, 2, {1, 1}};
  EXPECT_THROW(rle_decode(r), DataError);
  EXPECT_THROW(rle_from_json(nlohmann::json{{"size", {2, 2}}, {"counts", "abc"}}), DataError);
}

TEST(Png, RgbRoundTrip) {
  const auto dir = temp_dir("png_rgb");
  RgbImage img(7, 5);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 37);
  write_png(dir / "a.png", img);
  EXPECT_EQ(read_png_rgb(dir / "a.png"), img);
}

TEST(Png, MaskRoundTrip) {
  const auto dir = temp_dir("png_mask");
  std::mt19937_64 rng(1);
  const Mask m = oracle::random_mask(rng, 33, 17, 0.3);
  write_png(dir / "m.png", m);
  EXPECT_EQ(read_png_mask(dir / "m.png"), m);
}

TEST(Png, MissingFileIsDataError) { EXPECT_THROW(read_png_rgb("/nonexistent/x.png"), DataError); }

TEST(Resample, IdentityAtSameSize) {
  FloatImage img(1, 4, 4);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i);
  const FloatImage r = resample_region(img, 0.0, 0.0, 4.0, 4);
  EXPECT_EQ(r.data, img.data);
}

TEST(Resample, AveragesOnExactHalving) {
  FloatImage img(1, 4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) img.at(0, x, y) = static_cast<float>(x + 4 * y);
  }
  const FloatImage r = resample_region(img, 0.0, 0.0, 4.0, 2);
  EXPECT_FLOAT_EQ(r.at(0, 0, 0), (0 + 1 + 4 + 5) / 4.0f);
  EXPECT_FLOAT_EQ(r.at(0, 1, 1), (10 + 11 + 14 + 15) / 4.0f);
}

TEST(Resample, OutsideReadsZero) {
  FloatImage img(1, 2, 2);
  std::fill(img.data.begin(), img.data.end(), 1.0f);
  const FloatImage r = resample_region(img, -2.0, -2.0, 4.0, 4);
  EXPECT_FLOAT_EQ(r.at(0, 0, 0), 0.0f);
  EXPECT_FLOAT_EQ(r.at(0, 3, 3), 1.0f);
}

TEST(Resample, MaskUpscaleRoundsCorners) {
  Mask m(4, 4);
  m.at(1, 1) = m.at(2, 1) = m.at(1, 2) = m.at(2, 2) = 1;
  const Mask r = resample_region(m, 0.0, 0.0, 4.0, 16);
  // Edge midpoints keep the 8-px extent; each corner pixel drops to 0.625^2 < 0.5.
  EXPECT_EQ(r.area(), 60u);
  EXPECT_TRUE(r.at(4, 7) && r.at(11, 7) && !r.at(3, 7) && !r.at(12, 7));
  EXPECT_FALSE(r.at(4, 4) || r.at(11, 11));
  EXPECT_EQ(r, oracle::resample_mask(m, 0.0, 0.0, 4.0, 16));
}

TEST(Resample, MaskMatchesBilinearOracle) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> off(-6.0, 6.0), size(3.0, 40.0);
  for (int i = 0; i < 200; ++i) {
    const Mask m = oracle::random_blob_mask(rng, 24, 24);
    const double x0 = off(rng), y0 = off(rng), s = size(rng);
    EXPECT_EQ(resample_region(m, x0, y0, s, 32), oracle::resample_mask(m, x0, y0, s, 32));
  }
}

TEST(Flip, Involution) {
  std::mt19937_64 rng(2);
  const Mask m = oracle::random_mask(rng, 9, 4, 0.5);
  EXPECT_EQ(flip_horizontal(flip_horizontal(m)), m);
  EXPECT_EQ(flip_horizontal(m).at(0, 0), m.at(8, 0));
}
