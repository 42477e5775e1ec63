#include "sopseg/annotations.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sopseg/errors.hpp"
#include "sopseg/png_io.hpp"
#include "sopseg/rle.hpp"

namespace sopseg {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<int> array_element_lines(const std::string& text, const std::string& key) {
  // Walks the raw text tracking nesting so each object in the top-level array
  // `key` can be reported with the line it starts on.
  std::vector<int> lines;
  int line = 1;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  std::string last_string;
  std::string current;
  std::string pending_key;  // last string seen at depth 1
  int target_depth = -1;    // depth inside the wanted array
  for (char ch : text) {
    if (ch == '\n') ++line;
    if (in_string) {
      if (escaped) {
        escaped = false;
        current += ch;
      } else if (ch == '\\') {
        escaped = true;
      } else if (ch == '"') {
        in_string = false;
        last_string = current;
      } else {
        current += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_string = true;
        current.clear();
        break;
      case ':':
        if (depth == 1) pending_key = last_string;
        break;
      case '{':
      case '[':
        if (target_depth >= 0 && depth == target_depth) lines.push_back(line);
        ++depth;
        if (ch == '[' && depth == 2 && pending_key == key && target_depth < 0) target_depth = depth;
        break;
      case '}':
      case ']':
        --depth;
        if (target_depth >= 0 && depth < target_depth) target_depth = -2;
        break;
      case ',':
        if (depth == 1) pending_key.clear();
        break;
      default:
        break;
    }
  }
  return lines;
}

namespace {

std::string where(const fs::path& path, int line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

template <typename T>
T required(const json& obj, const char* field, const std::string& ctx) {
  if (!obj.contains(field)) throw DataError(ctx + "missing field '" + field + "'");
  try {
    return obj.at(field).get<T>();
  } catch (const json::exception&) {
    throw DataError(ctx + "field '" + field + "' has the wrong type");
  }
}

OrientedBox parse_obb(const json& obb, const std::string& ctx) {
  if (!obb.is_array() || obb.size() != 8) throw DataError(ctx + "'obb' must hold 8 numbers");
  std::array<Point2, 4> c;
  for (int i = 0; i < 4; ++i) {
    if (!obb[2 * i].is_number() || !obb[2 * i + 1].is_number()) {
      throw DataError(ctx + "'obb' must hold 8 numbers");
    }
    c[i] = {obb[2 * i].get<double>(), obb[2 * i + 1].get<double>()};
  }
  try {
    return OrientedBox::from_corners(c);
  } catch (const DomainError& e) {
    throw DataError(ctx + "invalid oriented box: " + e.what());
  }
}

json obb_to_json(const OrientedBox& box) {
  json arr = json::array();
  for (const Point2& p : box.corners()) {
    arr.push_back(p.x);
    arr.push_back(p.y);
  }
  return arr;
}

}  // namespace

AnnotationSet load_annotations(const fs::path& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("annotation file not found: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": JSON parse error: " + e.what());
  }
  if (!root.is_object() || !root.contains("images") || !root.contains("instances") ||
      !root["images"].is_array() || !root["instances"].is_array()) {
    throw DataError(path.string() + ": expected object with 'images' and 'instances' arrays");
  }
  const fs::path base = path.parent_path();
  const auto image_lines = array_element_lines(text, "images");
  const auto instance_lines = array_element_lines(text, "instances");
  auto line_of = [](const std::vector<int>& lines, std::size_t i) {
    return i < lines.size() ? lines[i] : 0;
  };

  AnnotationSet set;
  std::map<std::int64_t, std::size_t> image_index;
  std::map<std::int64_t, std::string> unreadable;
  for (std::size_t i = 0; i < root["images"].size(); ++i) {
    const json& e = root["images"][i];
    const std::string ctx = where(path, line_of(image_lines, i)) + "image " + std::to_string(i) + ": ";
    if (!e.is_object()) throw DataError(ctx + "expected an object");
    ImageEntry img;
    img.id = required<std::int64_t>(e, "id", ctx);
    img.path = required<std::string>(e, "path", ctx);
    img.width = required<int>(e, "w", ctx);
    img.height = required<int>(e, "h", ctx);
    if (img.width <= 0 || img.height <= 0) throw DataError(ctx + "image size must be positive");
    if (image_index.count(img.id)) throw DataError(ctx + "duplicate image id " + std::to_string(img.id));
    if (opts.load_pixels) {
      try {
        auto px = std::make_shared<RgbImage>(read_png_rgb(base / img.path));
        if (px->width != img.width || px->height != img.height) {
          throw DataError(ctx + "declared size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                          " does not match the PNG");
        }
        img.pixels = std::move(px);
      } catch (const DataError& err) {
        // Lenient loads drop the image's instances instead of the whole file.
        if (opts.mode == LoadMode::Strict) throw;
        unreadable[img.id] = err.what();
      }
    }
    image_index[img.id] = set.images.size();
    set.images.push_back(std::move(img));
  }

  for (std::size_t i = 0; i < root["instances"].size(); ++i) {
    const json& e = root["instances"][i];
    const int line = line_of(instance_lines, i);
    const std::string ctx = where(path, line) + "instance " + std::to_string(i) + ": ";
    std::int64_t id = -1;
    try {
      if (!e.is_object()) throw DataError(ctx + "expected an object");
      SampleRecord rec;
      id = rec.instance_id = required<std::int64_t>(e, "id", ctx);
      rec.image_id = required<std::int64_t>(e, "image_id", ctx);
      rec.class_label = required<std::string>(e, "class", ctx);
      if (!e.contains("obb")) throw DataError(ctx + "missing field 'obb'");
      rec.obox = parse_obb(e["obb"], ctx);
      auto it = image_index.find(rec.image_id);
      if (it == image_index.end()) throw DataError(ctx + "unknown image_id " + std::to_string(rec.image_id));
      const ImageEntry& img = set.images[it->second];
      if (auto bad = unreadable.find(rec.image_id); bad != unreadable.end()) {
        throw DataError(ctx + "image unreadable (" + bad->second + ")");
      }
      rec.image = img.pixels;
      if (rec.obox.cx < 0 || rec.obox.cy < 0 || rec.obox.cx > img.width || rec.obox.cy > img.height) {
        throw DataError(ctx + "oriented box center lies outside the image");
      }
      if (e.contains("mask") && !e["mask"].is_null()) {
        const json& m = e["mask"];
        if (m.is_string()) {
          rec.gt_mask = read_png_mask(base / m.get<std::string>());
        } else {
          rec.gt_mask = rle_decode(rle_from_json(m));
        }
        if (rec.gt_mask.width != img.width || rec.gt_mask.height != img.height) {
          throw DataError(ctx + "mask shape does not match image shape");
        }
      } else if (opts.require_masks) {
        throw DataError(ctx + "missing field 'mask'");
      }
      set.records.push_back(std::move(rec));
    } catch (const DataError& err) {
      if (opts.mode == LoadMode::Strict) throw;
      std::string msg = err.what();
      if (msg.rfind(ctx, 0) == 0) msg = msg.substr(ctx.size());
      set.skipped.push_back({line, id, msg});
    }
  }
  return set;
}

void save_annotations(const fs::path& path, const AnnotationSet& set, MaskStorage storage) {
  const fs::path base = path.parent_path();
  if (!base.empty()) fs::create_directories(base);
  json root;
  root["images"] = json::array();
  for (const ImageEntry& img : set.images) {
    root["images"].push_back({{"id", img.id}, {"path", img.path}, {"w", img.width}, {"h", img.height}});
    if (img.pixels) {
      const fs::path out = base / img.path;
      if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
      write_png(out, *img.pixels);
    }
  }
  root["instances"] = json::array();
  for (const SampleRecord& rec : set.records) {
    json e = {{"id", rec.instance_id},
              {"image_id", rec.image_id},
              {"class", rec.class_label},
              {"obb", obb_to_json(rec.obox)}};
    if (!rec.gt_mask.empty() && storage == MaskStorage::Rle) {
      e["mask"] = rle_to_json(rle_encode(rec.gt_mask));
    } else if (!rec.gt_mask.empty() && storage == MaskStorage::Png) {
      const std::string rel = "masks/" + std::to_string(rec.instance_id) + ".png";
      fs::create_directories(base / "masks");
      write_png(base / rel, rec.gt_mask);
      e["mask"] = rel;
    }
    root["instances"].push_back(std::move(e));
  }
  // One instance per line keeps line-numbered diagnostics useful.
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "{\n\"images\": [\n";
  for (std::size_t i = 0; i < root["images"].size(); ++i) {
    out << root["images"][i].dump() << (i + 1 < root["images"].size() ? ",\n" : "\n");
  }
  out << "],\n\"instances\": [\n";
  for (std::size_t i = 0; i < root["instances"].size(); ++i) {
    out << root["instances"][i].dump() << (i + 1 < root["instances"].size() ? ",\n" : "\n");
  }
  out << "]\n}\n";
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace sopseg
