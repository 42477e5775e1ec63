#include "sopseg/overlay.hpp"

#include <cmath>
#include <map>

#include "sopseg/errors.hpp"
#include "sopseg/png_io.hpp"

namespace sopseg {

namespace fs = std::filesystem;

Rgb instance_color(std::size_t index) {
  const double hue = std::fmod(index * 137.50776405, 360.0) / 60.0;
  const double s = 0.85, v = 0.95;
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(hue, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto to8 = [m](double t) { return static_cast<std::uint8_t>(std::lround(255.0 * (t + m))); };
  return {to8(r), to8(g), to8(b)};
}

RgbImage render_overlay(const RgbImage& image, const std::vector<const Mask*>& masks, double alpha) {
  RgbImage out = image;
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const Mask& m = *masks[k];
    if (m.width != image.width || m.height != image.height) throw ShapeError("overlay mask size mismatch");
    const Rgb color = instance_color(k);
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        if (!m.at(x, y)) continue;
        const bool edge = x == 0 || y == 0 || x + 1 == m.width || y + 1 == m.height || !m.at(x - 1, y) ||
                          !m.at(x + 1, y) || !m.at(x, y - 1) || !m.at(x, y + 1);
        std::uint8_t* p = out.px(x, y);
        for (int c = 0; c < 3; ++c) {
          const double blended = edge ? color[c] : (1.0 - alpha) * p[c] + alpha * color[c];
          p[c] = static_cast<std::uint8_t>(std::clamp(std::lround(blended), 0L, 255L));
        }
      }
    }
  }
  return out;
}

std::vector<fs::path> visualize_manifest(const fs::path& manifest_path, const fs::path& out_dir, double alpha) {
  const Manifest manifest = load_manifest(manifest_path);
  std::map<std::int64_t, std::vector<const Mask*>> by_image;
  for (const ManifestInstance& inst : manifest.instances) by_image[inst.image_id].push_back(&inst.mask);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const ManifestImage& img : manifest.images) {
    fs::path src = img.path;
    if (src.is_relative()) src = manifest_path.parent_path() / src;
    const RgbImage pixels = read_png_rgb(src);
    const fs::path dst = out_dir / (std::to_string(img.id) + ".png");
    write_png(dst, render_overlay(pixels, by_image[img.id], alpha));
    written.push_back(dst);
  }
  return written;
}

}  // namespace sopseg
