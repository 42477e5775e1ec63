#include "sopseg/export.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "sopseg/errors.hpp"
#include "sopseg/patch.hpp"
#include "sopseg/png_io.hpp"
#include "sopseg/rle.hpp"

namespace sopseg {

namespace fs = std::filesystem;
using nlohmann::json;

MaskFormat mask_format_from_string(const std::string& s) {
  if (s == "png") return MaskFormat::Png;
  if (s == "rle") return MaskFormat::Rle;
  throw ConfigError("mask format must be 'png' or 'rle', got '" + s + "'");
}

std::string to_string(MaskFormat f) { return f == MaskFormat::Png ? "png" : "rle"; }

fs::path export_masks(const std::vector<InstanceResult>& results, const std::vector<ManifestImage>& images,
                      const fs::path& dir, MaskFormat format) {
  fs::create_directories(dir);
  if (format == MaskFormat::Png) fs::create_directories(dir / "masks");
  json root;
  root["format"] = to_string(format);
  root["images"] = json::array();
  for (const ManifestImage& img : images) {
    root["images"].push_back({{"id", img.id}, {"path", img.path}, {"w", img.width}, {"h", img.height}});
  }
  root["instances"] = json::array();
  for (const InstanceResult& r : results) {
    const Mask full = back_project(r.crop_mask, r.window, r.image_width, r.image_height);
    json e = {{"id", r.instance_id},
              {"image_id", r.image_id},
              {"class", r.class_label},
              {"p_iou", r.p_iou},
              {"window", {r.window.x_s, r.window.y_s, r.window.size}}};
    if (format == MaskFormat::Png) {
      const std::string rel = "masks/" + std::to_string(r.instance_id) + ".png";
      write_png(dir / rel, full);
      e["mask"] = rel;
    } else {
      e["mask"] = rle_to_json(rle_encode(full));
    }
    root["instances"].push_back(std::move(e));
  }
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  if (!out) throw DataError("cannot write " + manifest.string());
  out << root.dump(1) << "\n";
  if (!out) throw DataError("failed writing " + manifest.string());
  return manifest;
}

Manifest load_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("manifest not found: " + manifest_path.string());
  json root;
  try {
    root = json::parse(in);
    Manifest m;
    m.format = mask_format_from_string(root.at("format").get<std::string>());
    for (const json& img : root.at("images")) {
      m.images.push_back({img.at("id").get<std::int64_t>(), img.at("path").get<std::string>(),
                          img.at("w").get<int>(), img.at("h").get<int>()});
    }
    const fs::path base = manifest_path.parent_path();
    for (const json& e : root.at("instances")) {
      ManifestInstance inst;
      inst.id = e.at("id").get<std::int64_t>();
      inst.image_id = e.at("image_id").get<std::int64_t>();
      inst.class_label = e.at("class").get<std::string>();
      inst.p_iou = e.at("p_iou").get<double>();
      const json& mask = e.at("mask");
      inst.mask = mask.is_string() ? read_png_mask(base / mask.get<std::string>()) : rle_decode(rle_from_json(mask));
      m.instances.push_back(std::move(inst));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
}

}  // namespace sopseg
