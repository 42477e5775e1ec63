#include "sopseg/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sopseg/evaluate.hpp"
#include "sopseg/export.hpp"
#include "sopseg/overlay.hpp"
#include "sopseg/png_io.hpp"

namespace sopseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path out_dir(const RunConfig& cfg) { return cfg.get<std::string>("out"); }

fs::path required_path(const RunConfig& cfg, const std::string& key) {
  const auto v = cfg.get<std::string>(key);
  if (v.empty()) throw ConfigError("missing required setting '" + key + "'");
  return v;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<ShapeKind> parse_kinds(const std::string& list) {
  std::vector<ShapeKind> kinds;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) kinds.push_back(shape_kind_from_string(item));
  }
  return kinds;
}

// Loads a checkpoint and reconciles ram.s_in with the size it was trained at.
SopSegModel load_checked(const RunConfig& cfg, PatchOptions& opts) {
  auto model = load_model(required_path(cfg, "checkpoint"));
  const int trained = model->config().s_in;
  if (trained != opts.ram.s_in && cfg.source("ram.s_in") != ValueSource::Default) {
    throw ConfigError("ram.s_in=" + std::to_string(opts.ram.s_in) + " but the checkpoint expects " +
                      std::to_string(trained));
  }
  opts.ram.s_in = trained;
  model->eval();
  return model;
}

std::array<Point2, 4> parse_obb_text(const std::string& text) {
  std::string norm = text;
  for (char& c : norm) {
    if (c == ',' || c == '[' || c == ']') c = ' ';
  }
  std::stringstream ss(norm);
  std::vector<double> v;
  double x = 0;
  while (ss >> x) v.push_back(x);
  if (v.size() != 8 || !ss.eof()) throw ConfigError("infer.obb needs 8 numbers: x1,y1,x2,y2,x3,y3,x4,y4");
  return {Point2{v[0], v[1]}, Point2{v[2], v[3]}, Point2{v[4], v[5]}, Point2{v[6], v[7]}};
}

}  // namespace

RamParams ram_params_from(const RunConfig& cfg) {
  RamParams p;
  p.m = cfg.get<double>("ram.m");
  p.k0 = cfg.get<double>("ram.k0");
  p.s_max = cfg.get<double>("ram.s_max");
  p.s_in = cfg.get<int>("ram.s_in");
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

ModelConfig model_config_from(const RunConfig& cfg) {
  ModelConfig m;
  m.s_in = cfg.get<int>("ram.s_in");
  m.backend = backend_from_string(cfg.get<std::string>("model.backend"));
  m.encoder.width = cfg.get<int>("model.width");
  m.encoder.depth = cfg.get<int>("model.depth");
  m.encoder.heads = cfg.get<int>("model.heads");
  m.encoder.mlp_ratio = cfg.get<int>("model.mlp_ratio");
  m.encoder.shallow_tap = cfg.get<int>("model.shallow_tap");
  m.encoder.pe_source_side = cfg.get<int>("model.pe_source_side");
  m.decoder.dim = m.encoder.width;
  m.decoder.depth = cfg.get<int>("model.decoder_depth");
  m.decoder.heads = cfg.get<int>("model.decoder_heads");
  m.decoder.mlp_dim = cfg.get<int>("model.decoder_mlp_dim");
  m.decoder.refine_channels = cfg.get<int>("model.refine_channels");
  m.validate();
  return m;
}

TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig t;
  t.lr_decoder = cfg.get<double>("train.lr_decoder");
  t.lr_refine = cfg.get<double>("train.lr_refine");
  t.epochs = cfg.get<int>("train.epochs");
  t.batch_size = cfg.get<int>("train.batch_size");
  t.lambda_iou = cfg.get<double>("train.lambda_iou");
  t.weight_decay = cfg.get<double>("train.weight_decay");
  t.anneal_steps = cfg.get<std::int64_t>("train.anneal_steps");
  t.seed = cfg.get<std::uint64_t>("seed");
  t.edge_supervision = cfg.get<bool>("train.edge_supervision");
  t.freeze_backbone = cfg.get<bool>("model.freeze_backbone");
  t.freeze_prompt_encoder = cfg.get<bool>("model.freeze_prompt_encoder");
  t.stop_at_miou = cfg.get<double>("train.stop_at_miou");
  t.eval_batch_size = cfg.get<int>("eval.batch_size");
  t.dilation_ratio = cfg.get<double>("eval.dilation_ratio");
  t.resume = cfg.get<std::string>("train.resume");
  t.verbose = cfg.get<bool>("train.verbose");
  t.validate();
  return t;
}

PatchOptions patch_options_from(const RunConfig& cfg) {
  PatchOptions o;
  o.ram = ram_params_from(cfg);
  o.jitter_lo = cfg.get<double>("train.jitter_lo");
  o.jitter_hi = cfg.get<double>("train.jitter_hi");
  o.hflip = cfg.get<bool>("train.hflip");
  if (!(0.0 <= o.jitter_lo && o.jitter_lo <= o.jitter_hi && o.jitter_hi <= 1.0)) {
    throw ConfigError("jitter range must satisfy 0 <= jitter_lo <= jitter_hi <= 1");
  }
  return o;
}

SynthConfig synth_config_from(const RunConfig& cfg) {
  SynthConfig s;
  s.image_side = cfg.get<int>("synth.image_side");
  s.min_size = cfg.get<double>("synth.min_size");
  s.max_size = cfg.get<double>("synth.max_size");
  s.max_objects_per_image = cfg.get<int>("synth.max_objects_per_image");
  s.noise_sigma = cfg.get<double>("synth.noise");
  s.min_contrast = cfg.get<double>("synth.min_contrast");
  s.kinds = parse_kinds(cfg.get<std::string>("synth.shapes"));
  s.validate();
  return s;
}

SynthSummary cmd_synth(const RunConfig& cfg) {
  const fs::path out = out_dir(cfg);
  SynthConfig base = synth_config_from(cfg);
  const auto seed = cfg.get<std::uint64_t>("seed");
  const auto fmt = mask_format_from_string(cfg.get<std::string>("synth.mask_format"));
  const MaskStorage storage = fmt == MaskFormat::Rle ? MaskStorage::Rle : MaskStorage::Png;
  const int n_train = cfg.get<int>("synth.train_instances");
  const int n_val = cfg.get<int>("synth.val_instances");
  if (n_train <= 0 || n_val < 0) throw ConfigError("synth instance counts must be positive");

  SynthConfig tc = base;
  tc.num_instances = n_train;
  tc.image_dir = "images/train";
  const auto train = generate_synthetic(tc, seed);

  SynthConfig vc = base;
  vc.num_instances = n_val;
  vc.image_dir = "images/val";
  vc.first_image_id = tc.first_image_id + static_cast<std::int64_t>(train.images.size());
  vc.first_instance_id = tc.first_instance_id + static_cast<std::int64_t>(train.records.size());
  AnnotationSet val;
  if (n_val > 0) val = generate_synthetic(vc, seed + 0x9e3779b97f4a7c15ULL);

  fs::create_directories(out);
  SynthSummary s;
  s.train_file = out / "train.json";
  s.val_file = out / "val.json";
  save_annotations(s.train_file, train, storage);
  save_annotations(s.val_file, val, storage);
  s.train_images = train.images.size();
  s.train_instances = train.records.size();
  s.val_images = val.images.size();
  s.val_instances = val.records.size();
  write_json(out / "dataset.json", {{"train", {{"file", "train.json"},
                                               {"images", s.train_images},
                                               {"instances", s.train_instances}}},
                                    {"val", {{"file", "val.json"},
                                             {"images", s.val_images},
                                             {"instances", s.val_instances}}},
                                    {"seed", seed}});
  cfg.write(out);
  return s;
}

FitResult cmd_train(const RunConfig& cfg) {
  const fs::path out = out_dir(cfg);
  const auto model_cfg = model_config_from(cfg);
  const auto train_cfg = train_config_from(cfg);
  const auto opts = patch_options_from(cfg);
  const LoadOptions load{LoadMode::Strict, true, true};
  const auto train = load_annotations(required_path(cfg, "data.train"), load);
  std::vector<SampleRecord> val;
  if (const auto v = cfg.get<std::string>("data.val"); !v.empty()) val = load_annotations(v, load).records;

  cfg.write(out);
  torch::manual_seed(train_cfg.seed);
  auto model = build_model(model_cfg, cfg.get<std::string>("model.backbone_weights"));
  const auto result = fit(model, train.records, val, train_cfg, opts, out);
  write_json(out / "train_summary.json", {{"epochs_completed", result.epochs_completed},
                                          {"steps", result.steps},
                                          {"best_val_miou", result.best_val_miou},
                                          {"last_val_miou", result.last_val_miou},
                                          {"last_val_mbiou", result.last_val_mbiou},
                                          {"stopped_early", result.stopped_early},
                                          {"best_checkpoint", result.best_checkpoint.string()},
                                          {"last_checkpoint", result.last_checkpoint.string()}});
  return result;
}

EvalReport cmd_eval(const RunConfig& cfg) {
  const fs::path out = out_dir(cfg);
  auto opts = patch_options_from(cfg);
  auto model = load_checked(cfg, opts);
  auto data = cfg.get<std::string>("eval.data");
  if (data.empty()) data = required_path(cfg, "data.val").string();
  const auto set = load_annotations(data, {LoadMode::Strict, true, true});
  const auto samples = build_eval_samples(set.records, opts);
  const auto scores =
      score_instances(model_predictor(model), samples, cfg.get<int>("eval.batch_size"),
                      cfg.get<double>("eval.dilation_ratio"));
  const auto report = aggregate(scores);

  fs::create_directories(out);
  cfg.write(out);
  write_json(out / "eval_report.json", report.to_json());
  std::ofstream(out / "eval_report.txt") << report.to_table();
  json per = json::array();
  for (const auto& s : scores) {
    per.push_back({{"id", s.instance_id}, {"class", s.class_label}, {"iou", s.iou}, {"biou", s.biou},
                   {"p_iou", s.predicted_iou}});
  }
  write_json(out / "instance_scores.json", per);
  return report;
}

InferResult cmd_infer(const RunConfig& cfg) {
  const fs::path out = out_dir(cfg);
  auto opts = patch_options_from(cfg);
  auto model = load_checked(cfg, opts);
  SampleRecord rec;
  rec.image = std::make_shared<RgbImage>(read_png_rgb(required_path(cfg, "infer.image")));
  rec.obox = OrientedBox::from_corners(parse_obb_text(cfg.get<std::string>("infer.obb")));
  rec.class_label = "object";
  if (!(rec.obox.len_short > 0)) throw DataError("infer.obb is degenerate");
  std::mt19937_64 unused(0);
  const auto ps = build_patch_sample(rec, opts, PatchMode::Eval, unused);
  if (!ps) throw DataError("infer.obb is smaller than one pixel");
  const auto pred = model_predictor(model)(std::span<const PatchSample>(&*ps, 1)).front();

  InferResult r;
  r.crop_mask = pred.mask;
  r.p_iou = pred.p_iou;
  r.window = ps->window;
  r.mask = back_project(pred.mask, ps->window, rec.image->width, rec.image->height);

  fs::create_directories(out);
  cfg.write(out);
  write_png(out / "mask.png", r.mask);
  write_json(out / "result.json", {{"p_iou", r.p_iou},
                                   {"area", r.mask.area()},
                                   {"window", {r.window.x_s, r.window.y_s, r.window.size}},
                                   {"mask", "mask.png"}});
  return r;
}

AnnotateSummary cmd_annotate(const RunConfig& cfg) {
  const fs::path out = out_dir(cfg);
  auto opts = patch_options_from(cfg);
  auto model = load_checked(cfg, opts);
  const double tau = cfg.get<double>("annotate.tau");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("annotate.tau must lie in [0, 1]");
  const auto format = mask_format_from_string(cfg.get<std::string>("annotate.mask_format"));
  const fs::path input = required_path(cfg, "annotate.input");
  const auto set = load_annotations(input, {LoadMode::Lenient, false, true});

  std::vector<SkippedEntry> skipped = set.skipped;
  std::vector<PatchSample> samples;
  std::vector<const SampleRecord*> sources;
  std::mt19937_64 unused(0);
  for (const SampleRecord& rec : set.records) {
    auto ps = build_patch_sample(rec, opts, PatchMode::Eval, unused);
    if (!ps) {
      skipped.push_back({0, rec.instance_id, "oriented box smaller than one pixel"});
      continue;
    }
    samples.push_back(std::move(*ps));
    sources.push_back(&rec);
  }

  const auto predict = model_predictor(model);
  const int batch = cfg.get<int>("eval.batch_size");
  if (batch <= 0) throw ConfigError("eval.batch_size must be positive");
  std::vector<InstanceResult> results;
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch)) {
    const std::size_t n = std::min<std::size_t>(batch, samples.size() - i);
    const auto preds = predict(std::span<const PatchSample>(samples.data() + i, n));
    for (std::size_t k = 0; k < n; ++k) {
      const PatchSample& ps = samples[i + k];
      results.push_back({ps.instance_id, ps.image_id, ps.class_label, preds[k].p_iou, preds[k].mask, ps.window,
                         ps.image_width, ps.image_height});
    }
  }

  std::vector<ManifestImage> images;
  const fs::path base = fs::absolute(input).parent_path();
  for (const ImageEntry& img : set.images) images.push_back({img.id, (base / img.path).string(), img.width, img.height});

  fs::create_directories(out);
  cfg.write(out);
  AnnotateSummary summary;
  summary.manifest = export_masks(results, images, out, format);
  summary.annotated = results.size();
  summary.skipped = skipped.size();

  json flagged = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const InstanceResult& r = results[i];
    if (!(r.p_iou < tau)) continue;
    const Mask full = back_project(r.crop_mask, r.window, r.image_width, r.image_height);
    const fs::path overlay = fs::path("review") / (std::to_string(r.instance_id) + ".png");
    fs::create_directories(out / "review");
    write_png(out / overlay, render_overlay(*sources[i]->image, {&full}));
    flagged.push_back({{"id", r.instance_id},
                       {"image_id", r.image_id},
                       {"class", r.class_label},
                       {"p_iou", r.p_iou},
                       {"overlay", overlay.string()}});
  }
  summary.flagged = flagged.size();
  summary.review = out / "review_flagged.json";
  write_json(summary.review, {{"tau", tau}, {"rule", "p_iou < tau"}, {"flagged", flagged}});

  json sk = json::array();
  for (const SkippedEntry& s : skipped) sk.push_back({{"line", s.line}, {"id", s.id}, {"reason", s.reason}});
  write_json(out / "skipped.json", sk);
  return summary;
}

std::vector<fs::path> cmd_visualize(const RunConfig& cfg) {
  const fs::path out = out_dir(cfg);
  const double alpha = cfg.get<double>("visualize.alpha");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("visualize.alpha must lie in [0, 1]");
  auto written = visualize_manifest(required_path(cfg, "visualize.manifest"), out, alpha);
  cfg.write(out);
  return written;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  return 1;
}

int run_guarded(const std::function<void()>& fn, std::ostream& err) {
  try {
    fn();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace sopseg
