#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nn_fixtures.hpp"
#include "sopseg/annotations.hpp"
#include "sopseg/commands.hpp"
#include "sopseg/errors.hpp"
#include "sopseg/evaluate.hpp"
#include "sopseg/export.hpp"
#include "sopseg/png_io.hpp"

using namespace sopseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sopseg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

RunConfig synth_config(const fs::path& out, int seed = 5) {
  RunConfig cfg = RunConfig::defaults();
  cfg.set("out", out.string(), ValueSource::Flag);
  cfg.set("seed", seed, ValueSource::Flag);
  cfg.set("synth.train_instances", 10, ValueSource::Flag);
  cfg.set("synth.val_instances", 4, ValueSource::Flag);
  cfg.set("synth.image_side", 64, ValueSource::Flag);
  cfg.set("synth.max_size", 24.0, ValueSource::Flag);
  return cfg;
}

void set_micro_model(RunConfig& cfg) {
  cfg.set("ram.s_in", 64, ValueSource::File);
  cfg.set("model.width", 32, ValueSource::File);
  cfg.set("model.depth", 2, ValueSource::File);
  cfg.set("model.heads", 2, ValueSource::File);
  cfg.set("model.mlp_ratio", 2, ValueSource::File);
  cfg.set("model.pe_source_side", 64, ValueSource::File);
  cfg.set("model.decoder_heads", 2, ValueSource::File);
  cfg.set("model.decoder_mlp_dim", 64, ValueSource::File);
  cfg.set("model.refine_channels", 8, ValueSource::File);
}

/// Synthetic dataset plus an untrained micro checkpoint, built once.
struct Workspace {
  fs::path root;
  fs::path data;
  fs::path checkpoint;

  static const Workspace& get() {
    static const Workspace w = [] {
      Workspace ws;
      ws.root = temp_dir("pipeline");
      ws.data = ws.root / "data";
      cmd_synth(synth_config(ws.data));
      auto model = fixtures::seeded_model(fixtures::micro_config(), 31);
      ws.checkpoint = ws.root / "micro.ckpt";
      save_model(*model, ws.checkpoint);
      return ws;
    }();
    return w;
  }
};

RunConfig with_checkpoint(const fs::path& out) {
  RunConfig cfg = RunConfig::defaults();
  cfg.set("out", out.string(), ValueSource::Flag);
  cfg.set("checkpoint", Workspace::get().checkpoint.string(), ValueSource::Flag);
  return cfg;
}

}  // namespace

TEST(Evaluate, OracleAndEmptyPredictors) {
  const auto set = load_annotations(Workspace::get().data / "val.json");
  PatchOptions opts;
  opts.ram.s_in = 64;
  const auto samples = build_eval_samples(set.records, opts);
  ASSERT_EQ(samples.size(), set.records.size());
  const Predictor oracle = [](std::span<const PatchSample> batch) {
    std::vector<Prediction> out;
    for (const auto& s : batch) out.push_back({s.gt_mask_patch, 1.0});
    return out;
  };
  const Predictor empty = [](std::span<const PatchSample> batch) {
    std::vector<Prediction> out;
    for (const auto& s : batch) out.push_back({Mask(s.gt_mask_patch.width, s.gt_mask_patch.height), 0.0});
    return out;
  };
  const auto perfect = evaluate(oracle, samples, 3);
  EXPECT_DOUBLE_EQ(perfect.miou, 1.0);
  EXPECT_DOUBLE_EQ(perfect.mbiou, 1.0);
  EXPECT_EQ(perfect.instances, samples.size());
  const auto none = evaluate(empty, samples, 2);
  EXPECT_DOUBLE_EQ(none.miou, 0.0);
  const auto scores = score_instances(oracle, samples, 4);
  ASSERT_EQ(scores.size(), samples.size());
  EXPECT_EQ(scores[0].instance_id, samples[0].instance_id);
  EXPECT_THROW(evaluate(oracle, {}, 2), DataError);
}

TEST(Evaluate, ModelPredictorShapesAndRange) {
  const auto set = load_annotations(Workspace::get().data / "val.json");
  PatchOptions opts;
  opts.ram.s_in = 64;
  const auto samples = build_eval_samples(set.records, opts);
  const auto predict = model_predictor(load_model(Workspace::get().checkpoint));
  const auto preds = predict(samples);
  ASSERT_EQ(preds.size(), samples.size());
  for (const auto& p : preds) {
    EXPECT_EQ(p.mask.width, 64);
    EXPECT_GE(p.p_iou, 0.0);
    EXPECT_LE(p.p_iou, 1.0);
  }
  const auto again = predict(samples);
  for (std::size_t i = 0; i < preds.size(); ++i) EXPECT_EQ(preds[i].mask, again[i].mask);
}

TEST(Synth, DeterministicAndDisjoint) {
  const auto a = temp_dir("synth_a"), b = temp_dir("synth_b");
  const auto sa = cmd_synth(synth_config(a));
  cmd_synth(synth_config(b));
  EXPECT_EQ(sa.train_instances, 10u);
  EXPECT_EQ(sa.val_instances, 4u);
  EXPECT_EQ(slurp(a / "train.json"), slurp(b / "train.json"));
  EXPECT_EQ(slurp(a / "val.json"), slurp(b / "val.json"));
  const auto ta = load_annotations(a / "train.json"), tb = load_annotations(b / "train.json");
  for (std::size_t i = 0; i < ta.images.size(); ++i) EXPECT_EQ(*ta.images[i].pixels, *tb.images[i].pixels);

  const auto va = load_annotations(a / "val.json");
  std::set<std::int64_t> train_images, train_instances;
  for (const auto& img : ta.images) train_images.insert(img.id);
  for (const auto& r : ta.records) train_instances.insert(r.instance_id);
  for (const auto& img : va.images) EXPECT_EQ(train_images.count(img.id), 0u);
  for (const auto& r : va.records) EXPECT_EQ(train_instances.count(r.instance_id), 0u);
  EXPECT_EQ(read_json(a / "dataset.json").at("train").at("instances"), 10);

  const auto cfg = read_json(a / "run_config.json");
  EXPECT_EQ(cfg.at("synth.train_instances").at("source"), "flag");
  RunConfig reloaded = RunConfig::defaults();
  reloaded.merge_file(a / "run_config.json");
  const auto c = temp_dir("synth_c");
  reloaded.set("out", c.string(), ValueSource::Flag);
  cmd_synth(reloaded);
  EXPECT_EQ(slurp(a / "train.json"), slurp(c / "train.json"));
}

TEST(Train, CommandWritesSummaryAndHonoursFreeze) {
  const auto out = temp_dir("cmd_train");
  RunConfig cfg = RunConfig::defaults();
  set_micro_model(cfg);
  cfg.set("out", out.string(), ValueSource::Flag);
  cfg.set("data.train", (Workspace::get().data / "train.json").string(), ValueSource::Flag);
  cfg.set("data.val", (Workspace::get().data / "val.json").string(), ValueSource::Flag);
  cfg.set("train.epochs", 1, ValueSource::Flag);
  cfg.set("train.batch_size", 5, ValueSource::Flag);
  cfg.set("model.freeze_backbone", true, ValueSource::Flag);
  const auto r = cmd_train(cfg);
  EXPECT_EQ(r.epochs_completed, 1);
  EXPECT_EQ(r.steps, 2);
  EXPECT_TRUE(fs::exists(out / "train_summary.json"));
  EXPECT_TRUE(fs::exists(out / "run_config.json"));

  torch::manual_seed(cfg.get<std::uint64_t>("seed"));
  SopSegModel init(model_config_from(cfg));
  auto trained = load_model(out / "last.ckpt");
  EXPECT_EQ(group_checksum(*trained, ParamGroup::Backbone), group_checksum(*init, ParamGroup::Backbone));
  EXPECT_NE(group_checksum(*trained, ParamGroup::Decoder), group_checksum(*init, ParamGroup::Decoder));
}

TEST(Eval, ReportFilesAgree) {
  const auto out = temp_dir("cmd_eval");
  RunConfig cfg = with_checkpoint(out);
  cfg.set("eval.data", (Workspace::get().data / "val.json").string(), ValueSource::Flag);
  const auto report = cmd_eval(cfg);
  const auto j = read_json(out / "eval_report.json");
  EXPECT_DOUBLE_EQ(EvalReport::from_json(j).miou, report.miou);
  EXPECT_EQ(slurp(out / "eval_report.txt"), report.to_table());
  EXPECT_EQ(read_json(out / "instance_scores.json").size(), 4u);
  EXPECT_FALSE(report.per_class.empty());

  RunConfig mismatch = with_checkpoint(temp_dir("cmd_eval_bad"));
  mismatch.set("eval.data", (Workspace::get().data / "val.json").string(), ValueSource::Flag);
  mismatch.set("ram.s_in", 128, ValueSource::Flag);
  EXPECT_THROW(cmd_eval(mismatch), ConfigError);
}

TEST(Infer, DeterministicSingleInstance) {
  const auto set = load_annotations(Workspace::get().data / "val.json");
  const auto& rec = set.records.front();
  std::ostringstream obb;
  const auto c = rec.obox.corners();
  for (int i = 0; i < 4; ++i) obb << (i ? "," : "") << c[i].x << "," << c[i].y;
  const fs::path image = Workspace::get().data / set.images.front().path;

  InferResult first;
  for (int run = 0; run < 2; ++run) {
    const auto out = temp_dir("cmd_infer_" + std::to_string(run));
    RunConfig cfg = with_checkpoint(out);
    cfg.set("infer.image", image.string(), ValueSource::Flag);
    cfg.set("infer.obb", obb.str(), ValueSource::Flag);
    const auto r = cmd_infer(cfg);
    EXPECT_EQ(r.mask.width, rec.image->width);
    EXPECT_EQ(r.crop_mask.width, 64);
    EXPECT_GE(r.p_iou, 0.0);
    EXPECT_LE(r.p_iou, 1.0);
    EXPECT_EQ(read_png_mask(out / "mask.png"), r.mask);
    EXPECT_DOUBLE_EQ(read_json(out / "result.json").at("p_iou").get<double>(), r.p_iou);
    if (run == 0) first = r;
    else {
      EXPECT_EQ(r.mask, first.mask);
      EXPECT_EQ(r.p_iou, first.p_iou);
    }
  }
  RunConfig bad = with_checkpoint(temp_dir("cmd_infer_bad"));
  bad.set("infer.image", image.string(), ValueSource::Flag);
  bad.set("infer.obb", "1,2,3", ValueSource::Flag);
  EXPECT_THROW(cmd_infer(bad), ConfigError);
}

TEST(Annotate, TauExtremesManifestAndSkips) {
  const auto root = temp_dir("cmd_annotate");
  // Box-only input: drop masks, add one malformed box.
  auto j = read_json(Workspace::get().data / "val.json");
  for (auto& inst : j.at("instances")) {
    inst.erase("mask");
  }
  for (auto& img : j.at("images")) img["path"] = (Workspace::get().data / img.at("path").get<std::string>()).string();
  j.at("instances").push_back({{"id", 999}, {"image_id", j.at("images")[0].at("id")}, {"class", "bad"},
                               {"obb", {1, 1, 1, 1, 1, 1, 1, 1}}});
  const fs::path input = root / "boxes.json";
  std::ofstream(input) << j.dump(1);
  const std::string before = slurp(input);
  const std::size_t n_boxes = j.at("instances").size();

  for (double tau : {1.0, 0.0, 0.5}) {
    const auto out = root / ("tau_" + std::to_string(tau));
    RunConfig cfg = with_checkpoint(out);
    cfg.set("annotate.input", input.string(), ValueSource::Flag);
    cfg.set("annotate.tau", tau, ValueSource::Flag);
    const auto s = cmd_annotate(cfg);
    EXPECT_EQ(s.skipped, 1u);
    EXPECT_EQ(s.annotated, n_boxes - 1);
    const Manifest m = load_manifest(s.manifest);
    EXPECT_EQ(m.instances.size(), n_boxes - 1);
    const auto review = read_json(s.review);
    EXPECT_EQ(review.at("tau"), tau);
    std::size_t expected = 0;
    for (const auto& inst : m.instances) expected += inst.p_iou < tau;
    EXPECT_EQ(review.at("flagged").size(), expected);
    for (const auto& f : review.at("flagged")) EXPECT_TRUE(fs::exists(out / f.at("overlay").get<std::string>()));
    if (tau == 1.0) EXPECT_EQ(s.flagged, n_boxes - 1);
    if (tau == 0.0) EXPECT_EQ(s.flagged, 0u);
    EXPECT_EQ(read_json(out / "skipped.json").size(), 1u);
    for (const auto& inst : m.instances) EXPECT_EQ(inst.mask.width, 64);
  }
  EXPECT_EQ(slurp(input), before);

  RunConfig bad = with_checkpoint(root / "bad_tau");
  bad.set("annotate.input", input.string(), ValueSource::Flag);
  bad.set("annotate.tau", 1.5, ValueSource::Flag);
  EXPECT_THROW(cmd_annotate(bad), ConfigError);
}

TEST(Visualize, OneOverlayPerImage) {
  const auto root = temp_dir("cmd_vis");
  RunConfig ann = with_checkpoint(root / "ann");
  ann.set("annotate.input", (Workspace::get().data / "val.json").string(), ValueSource::Flag);
  const auto s = cmd_annotate(ann);
  RunConfig cfg = RunConfig::defaults();
  cfg.set("out", (root / "vis").string(), ValueSource::Flag);
  cfg.set("visualize.manifest", s.manifest.string(), ValueSource::Flag);
  const auto written = cmd_visualize(cfg);
  EXPECT_EQ(written.size(), load_manifest(s.manifest).images.size());
  for (const auto& p : written) EXPECT_EQ(read_png_rgb(p).width, 64);
}

TEST(ExitCodes, MapErrorKinds) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(DataError("x")), 3);
  EXPECT_EQ(exit_code_for(DomainError("x")), 3);
  EXPECT_EQ(exit_code_for(ShapeError("x")), 3);
  EXPECT_EQ(exit_code_for(NumericalError("x")), 4);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
  std::ostringstream err;
  EXPECT_EQ(run_guarded([] { throw DataError("no such file"); }, err), 3);
  EXPECT_NE(err.str().find("error: no such file"), std::string::npos);
  EXPECT_EQ(run_guarded([] {}, err), 0);
}

#ifdef SOPSEG_CLI
namespace {
int run_cli(const std::string& args) {
  const int status = std::system((std::string(SOPSEG_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  const auto out = temp_dir("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("train --help"), 0);
  EXPECT_EQ(run_cli("synth --no-such-flag"), 2);
  EXPECT_EQ(run_cli("synth --set train.bogus=1 -o " + out.string()), 2);
  EXPECT_EQ(run_cli("eval --checkpoint " + (out / "missing.ckpt").string() + " -o " + out.string()), 3);
  EXPECT_EQ(run_cli("synth --set synth.train_instances=3 --set synth.val_instances=1 --set synth.image_side=64 --set synth.max_size=24 -o " +
                    (out / "s").string()),
            0);
  EXPECT_TRUE(fs::exists(out / "s" / "train.json"));
  EXPECT_EQ(read_json(out / "s" / "run_config.json").at("synth.train_instances").at("source"), "flag");
}
#endif
