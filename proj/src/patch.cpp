#include "sopseg/patch.hpp"

#include <algorithm>
#include <cmath>

#include "sopseg/errors.hpp"

namespace sopseg {

namespace {

Point2 clamp_point(Point2 p, double hi) { return {std::clamp(p.x, 0.0, hi), std::clamp(p.y, 0.0, hi)}; }

// Integer-window crop of the normalized image; zero outside the image.
FloatImage crop_normalized(const RgbImage& img, int x0, int y0, int size, const Normalization& norm) {
  FloatImage out(3, size, size);
  const int xa = std::max(0, x0), xb = std::min(img.width, x0 + size);
  const int ya = std::max(0, y0), yb = std::min(img.height, y0 + size);
  for (int y = ya; y < yb; ++y) {
    for (int x = xa; x < xb; ++x) {
      const std::uint8_t* p = img.px(x, y);
      for (int c = 0; c < 3; ++c) out.at(c, x - x0, y - y0) = (p[c] - norm.mean[c]) / norm.stddev[c];
    }
  }
  return out;
}

Mask crop_mask(const Mask& m, int x0, int y0, int size) {
  Mask out(size, size);
  const int xa = std::max(0, x0), xb = std::min(m.width, x0 + size);
  const int ya = std::max(0, y0), yb = std::min(m.height, y0 + size);
  for (int y = ya; y < yb; ++y) {
    for (int x = xa; x < xb; ++x) out.at(x - x0, y - y0) = m.at(x, y);
  }
  return out;
}

}  // namespace

std::optional<PatchSample> build_patch_sample(const SampleRecord& rec, const PatchOptions& opts, PatchMode mode,
                                              std::mt19937_64& rng) {
  if (!rec.image) throw DataError("instance " + std::to_string(rec.instance_id) + " has no image pixels");
  const RgbImage& img = *rec.image;
  const int s_in = opts.ram.s_in;

  const HBox envelope = horizontal_envelope(rec.obox);
  const double d = std::max(envelope.w, envelope.h);
  if (d < 1.0) return std::nullopt;

  double a_x = 0.5, a_y = 0.5;
  bool flip = false;
  if (mode == PatchMode::Train) {
    std::uniform_real_distribution<double> jitter(opts.jitter_lo, opts.jitter_hi);
    a_x = jitter(rng);
    a_y = jitter(rng);
    if (opts.hflip) flip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  }

  const double region = region_size(d, opts.ram);
  CropWindow win = crop_window(envelope, region, a_x, a_y);
  win = clamp_window(round_window(win), img.width, img.height);
  const int x0 = static_cast<int>(win.x_s);
  const int y0 = static_cast<int>(win.y_s);
  const int size = static_cast<int>(win.size);

  PatchSample out;
  out.instance_id = rec.instance_id;
  out.image_id = rec.image_id;
  out.class_label = rec.class_label;
  out.window = win;
  out.image_width = img.width;
  out.image_height = img.height;

  const FloatImage crop = crop_normalized(img, x0, y0, size, opts.norm);
  out.patch = resample_region(crop, 0.0, 0.0, size, s_in);
  if (!rec.gt_mask.empty()) {
    out.gt_mask_patch = resample_region(crop_mask(rec.gt_mask, x0, y0, size), 0.0, 0.0, size, s_in);
  }

  PromptBundle prompt{envelope, oriented_prompts(rec.obox)};
  prompt = to_crop_coords(prompt, win, s_in);
  const double hi = static_cast<double>(s_in);
  prompt.points = {clamp_point(prompt.points.p1, hi), clamp_point(prompt.points.c, hi),
                   clamp_point(prompt.points.p2, hi)};

  if (flip) {
    out.flipped = true;
    out.patch = flip_horizontal(out.patch);
    if (!out.gt_mask_patch.empty()) out.gt_mask_patch = flip_horizontal(out.gt_mask_patch);
    prompt.box.x = hi - prompt.box.right();
    for (Point2* p : {&prompt.points.p1, &prompt.points.c, &prompt.points.p2}) p->x = hi - p->x;
  }
  out.prompt = prompt;
  return out;
}

Mask back_project(const Mask& crop_mask, const CropWindow& win, int image_width, int image_height) {
  Mask out(image_width, image_height);
  const int side = crop_mask.width;
  const double scale = side / win.size;
  const int x0 = std::max(0, static_cast<int>(std::floor(win.x_s)));
  const int y0 = std::max(0, static_cast<int>(std::floor(win.y_s)));
  const int x1 = std::min(image_width, static_cast<int>(std::ceil(win.x_s + win.size)));
  const int y1 = std::min(image_height, static_cast<int>(std::ceil(win.y_s + win.size)));
  for (int y = y0; y < y1; ++y) {
    const int v = static_cast<int>(std::floor((y + 0.5 - win.y_s) * scale));
    if (v < 0 || v >= crop_mask.height) continue;
    for (int x = x0; x < x1; ++x) {
      const int u = static_cast<int>(std::floor((x + 0.5 - win.x_s) * scale));
      if (u < 0 || u >= side) continue;
      out.at(x, y) = crop_mask.at(u, v);
    }
  }
  return out;
}

}  // namespace sopseg
