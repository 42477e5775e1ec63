#include "sopseg/run_config.hpp"

#include <fstream>

namespace sopseg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ValueSource s) {
  switch (s) {
    case ValueSource::Default:
      return "default";
    case ValueSource::File:
      return "file";
    case ValueSource::Flag:
      return "flag";
  }
  return "unknown";
}

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  const std::vector<std::pair<std::string, json>> table = {
      {"seed", 0},
      {"out", "run"},
      {"checkpoint", ""},
      // region-adaptive magnification
      {"ram.m", 32.0},
      {"ram.k0", 2.0},
      {"ram.s_max", 1024.0},
      {"ram.s_in", 256},
      // model
      {"model.backend", "tiny"},
      {"model.backbone_weights", ""},
      {"model.width", 192},
      {"model.depth", 4},
      {"model.heads", 3},
      {"model.mlp_ratio", 4},
      {"model.shallow_tap", 0},
      {"model.pe_source_side", 256},
      {"model.decoder_depth", 2},
      {"model.decoder_heads", 4},
      {"model.decoder_mlp_dim", 512},
      {"model.refine_channels", 32},
      {"model.freeze_backbone", false},
      {"model.freeze_prompt_encoder", false},
      // optimization
      {"train.lr_decoder", 5e-5},
      {"train.lr_refine", 1e-3},
      {"train.epochs", 32},
      {"train.batch_size", 8},
      {"train.lambda_iou", 5.0},
      {"train.weight_decay", 0.01},
      {"train.anneal_steps", 0},
      {"train.edge_supervision", true},
      {"train.hflip", true},
      {"train.jitter_lo", 0.3},
      {"train.jitter_hi", 0.7},
      {"train.stop_at_miou", 0.0},
      {"train.resume", ""},
      {"train.verbose", false},
      // synthetic data
      {"synth.train_instances", 500},
      {"synth.val_instances", 100},
      {"synth.image_side", 256},
      {"synth.min_size", 8.0},
      {"synth.max_size", 64.0},
      {"synth.max_objects_per_image", 4},
      {"synth.noise", 12.0},
      {"synth.min_contrast", 60.0},
      {"synth.shapes", "rectangle,ellipse,l_shape"},
      {"synth.mask_format", "rle"},
      // datasets
      {"data.train", ""},
      {"data.val", ""},
      // evaluation and annotation
      {"eval.data", ""},
      {"eval.dilation_ratio", 0.005},
      {"eval.batch_size", 8},
      {"infer.image", ""},
      {"infer.obb", ""},
      {"annotate.input", ""},
      {"annotate.tau", 0.5},
      {"annotate.mask_format", "png"},
      {"visualize.manifest", ""},
      {"visualize.alpha", 0.45},
  };
  for (const auto& [k, v] : table) cfg.entries_[k] = {v, ValueSource::Default};
  return cfg;
}

namespace {

bool compatible(const json& expected, const json& got) {
  if (expected.is_number_integer()) return got.is_number_integer();
  if (expected.is_number()) return got.is_number();
  return expected.type() == got.type();
}

void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  const bool resolved_entry = node.is_object() && node.contains("value") && node.contains("source");
  if (node.is_object() && !resolved_entry) {
    for (const auto& [k, v] : node.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out.emplace_back(prefix, resolved_entry ? node.at("value") : node);
  }
}

}  // namespace

void RunConfig::set(const std::string& key, json value, ValueSource source) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
  if (!compatible(it->second.value, value)) {
    throw ConfigError("config key '" + key + "' expects " + std::string(it->second.value.type_name()) + ", got " +
                      value.dump());
  }
  if (it->second.value.is_number_float()) value = value.get<double>();
  it->second = {std::move(value), source};
}

void RunConfig::merge_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(path.string() + ": expected a JSON object");
  std::vector<std::pair<std::string, json>> flat;
  flatten(root, "", flat);
  for (auto& [k, v] : flat) set(k, v, ValueSource::File);
}

void RunConfig::set_flag(const std::string& key, const std::string& raw) {
  json v;
  try {
    v = json::parse(raw);
  } catch (const json::parse_error&) {
    v = raw;
  }
  // A string-typed key keeps numeric-looking input as text.
  auto it = entries_.find(key);
  if (it != entries_.end() && it->second.value.is_string() && !v.is_string()) v = raw;
  set(key, std::move(v), ValueSource::Flag);
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  set_flag(assignment.substr(0, eq), assignment.substr(eq + 1));
}

ValueSource RunConfig::source(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.source;
}

const json& RunConfig::value(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.value;
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) out.push_back(k);
  return out;
}

json RunConfig::to_json() const {
  json out = json::object();
  for (const auto& [k, e] : entries_) out[k] = {{"value", e.value}, {"source", to_string(e.source)}};
  return out;
}

fs::path RunConfig::write(const fs::path& dir) const {
  fs::create_directories(dir);
  const fs::path path = dir / "run_config.json";
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json().dump(2) << "\n";
  return path;
}

}  // namespace sopseg
