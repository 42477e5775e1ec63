#include "sopseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "sopseg/errors.hpp"

namespace sopseg {

namespace {

void check_same_shape(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError("mask shapes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                     std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

double set_iou(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool x = a.data[i] != 0;
    const bool y = b.data[i] != 0;
    inter += (x && y);
    uni += (x || y);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// One 3x3 erosion step, separable; pixels beyond the raster read as 0.
Mask erode3(const Mask& m) {
  Mask rows(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const bool l = x > 0 && m.at(x - 1, y);
      const bool r = x + 1 < m.width && m.at(x + 1, y);
      rows.at(x, y) = (l && r && m.at(x, y)) ? 1 : 0;
    }
  }
  Mask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const bool u = y > 0 && rows.at(x, y - 1);
      const bool d = y + 1 < m.height && rows.at(x, y + 1);
      out.at(x, y) = (u && d && rows.at(x, y)) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

double mask_iou(const Mask& a, const Mask& b) {
  check_same_shape(a, b);
  return set_iou(a, b);
}

int boundary_band_width(int width, int height, double dilation_ratio) {
  const double diag = std::hypot(static_cast<double>(width), static_cast<double>(height));
  return std::max(1, static_cast<int>(std::lround(dilation_ratio * diag)));
}

Mask boundary_band(const Mask& m, int band) {
  Mask eroded = m;
  for (int i = 0; i < band; ++i) eroded = erode3(eroded);
  Mask out(m.width, m.height);
  for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = (m.data[i] && !eroded.data[i]) ? 1 : 0;
  return out;
}

double boundary_iou(const Mask& a, const Mask& b, double dilation_ratio) {
  check_same_shape(a, b);
  const int band = boundary_band_width(a.width, a.height, dilation_ratio);
  return set_iou(boundary_band(a, band), boundary_band(b, band));
}

EvalReport aggregate(const std::vector<InstanceScore>& scores) {
  if (scores.empty()) throw DataError("cannot aggregate an empty evaluation set");
  EvalReport report;
  for (const InstanceScore& s : scores) {
    ClassStats& c = report.per_class[s.class_label];
    c.mean_iou += s.iou;
    c.mean_biou += s.biou;
    ++c.count;
  }
  for (auto& [name, c] : report.per_class) {
    c.mean_iou /= static_cast<double>(c.count);
    c.mean_biou /= static_cast<double>(c.count);
    report.miou += c.mean_iou;
    report.mbiou += c.mean_biou;
  }
  report.miou /= static_cast<double>(report.per_class.size());
  report.mbiou /= static_cast<double>(report.per_class.size());
  report.instances = scores.size();
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [name, c] : per_class) {
    classes[name] = {{"iou", c.mean_iou}, {"biou", c.mean_biou}, {"count", c.count}};
  }
  return {{"per_class", classes}, {"miou", miou}, {"mbiou", mbiou}, {"instances", instances}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  for (const auto& [name, c] : j.at("per_class").items()) {
    r.per_class[name] = {c.at("iou").get<double>(), c.at("biou").get<double>(), c.at("count").get<std::size_t>()};
  }
  r.miou = j.at("miou").get<double>();
  r.mbiou = j.at("mbiou").get<double>();
  r.instances = j.at("instances").get<std::size_t>();
  return r;
}

std::string EvalReport::to_table() const {
  std::size_t name_w = 5;
  for (const auto& [name, c] : per_class) name_w = std::max(name_w, name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w)) << "class" << std::right << std::setw(10) << "IoU"
     << std::setw(10) << "BIoU" << std::setw(10) << "count" << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& [name, c] : per_class) {
    os << std::left << std::setw(static_cast<int>(name_w)) << name << std::right << std::setw(10)
       << 100.0 * c.mean_iou << std::setw(10) << 100.0 * c.mean_biou << std::setw(10) << c.count << "\n";
  }
  os << std::left << std::setw(static_cast<int>(name_w)) << "mean" << std::right << std::setw(10) << 100.0 * miou
     << std::setw(10) << 100.0 * mbiou << std::setw(10) << instances << "\n";
  return os.str();
}

}  // namespace sopseg
