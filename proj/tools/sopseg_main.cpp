// sopseg: synthetic data, training, evaluation and box-to-mask annotation.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "sopseg/commands.hpp"

namespace {

using Assignments = std::vector<std::pair<std::string, std::string>>;

struct Common {
  std::vector<std::string> config_files;
  std::vector<std::string> sets;
  Assignments flags;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_files, "JSON config file(s), applied in order")->check(CLI::ExistingFile);
  sub->add_option("--set", c.sets, "Override any key: --set train.epochs=4");
  sub->add_option_function<std::string>(
      "-o,--out", [&c](const std::string& v) { c.flags.emplace_back("out", v); }, "Output directory");
  sub->add_option_function<std::string>(
      "--seed", [&c](const std::string& v) { c.flags.emplace_back("seed", v); }, "Random seed");
}

void add_keyed(CLI::App* sub, Common& c, const std::string& name, const std::string& key, const std::string& help) {
  sub->add_option_function<std::string>(
      name, [&c, key](const std::string& v) { c.flags.emplace_back(key, v); }, help + " [" + key + "]");
}

sopseg::RunConfig resolve(const Common& c) {
  auto cfg = sopseg::RunConfig::defaults();
  for (const auto& f : c.config_files) cfg.merge_file(f);
  for (const auto& s : c.sets) cfg.set_assignment(s);
  for (const auto& [k, v] : c.flags) cfg.set_flag(k, v);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oriented-box prompted segmentation of small objects"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic train/val dataset");
  add_common(synth, common);
  add_keyed(synth, common, "--train-instances", "synth.train_instances", "Training instances");
  add_keyed(synth, common, "--val-instances", "synth.val_instances", "Validation instances");
  add_keyed(synth, common, "--image-side", "synth.image_side", "Image side in pixels");
  add_keyed(synth, common, "--mask-format", "synth.mask_format", "png or rle");

  auto* train = app.add_subcommand("train", "Train the segmenter");
  add_common(train, common);
  add_keyed(train, common, "--train", "data.train", "Training annotation file");
  add_keyed(train, common, "--val", "data.val", "Validation annotation file");
  add_keyed(train, common, "--epochs", "train.epochs", "Epochs");
  add_keyed(train, common, "--batch-size", "train.batch_size", "Batch size");
  add_keyed(train, common, "--s-in", "ram.s_in", "Network input side");
  add_keyed(train, common, "--backend", "model.backend", "tiny or frozen");
  add_keyed(train, common, "--backbone-weights", "model.backbone_weights", "Tensor archive for the frozen backend");
  add_keyed(train, common, "--resume", "train.resume", "Checkpoint to resume from");
  train->add_flag_callback("--no-edge", [&] { common.flags.emplace_back("train.edge_supervision", "false"); },
                           "Disable edge supervision [train.edge_supervision]");
  train->add_flag_callback("-v,--verbose", [&] { common.flags.emplace_back("train.verbose", "true"); },
                           "Print one line per epoch [train.verbose]");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint (IoU and boundary IoU per class)");
  add_common(eval, common);
  add_keyed(eval, common, "--checkpoint", "checkpoint", "Model checkpoint");
  add_keyed(eval, common, "--data", "eval.data", "Annotation file (default data.val)");

  auto* infer = app.add_subcommand("infer", "Segment one object given its oriented box");
  add_common(infer, common);
  add_keyed(infer, common, "--checkpoint", "checkpoint", "Model checkpoint");
  add_keyed(infer, common, "--image", "infer.image", "PNG image");
  add_keyed(infer, common, "--obb", "infer.obb", "x1,y1,x2,y2,x3,y3,x4,y4");

  auto* annotate = app.add_subcommand("annotate", "Turn oriented boxes into masks with a review list");
  add_common(annotate, common);
  add_keyed(annotate, common, "--checkpoint", "checkpoint", "Model checkpoint");
  add_keyed(annotate, common, "--input", "annotate.input", "Annotation file with boxes");
  add_keyed(annotate, common, "--tau", "annotate.tau", "Flag instances with predicted IoU below this");
  add_keyed(annotate, common, "--mask-format", "annotate.mask_format", "png or rle");

  auto* visualize = app.add_subcommand("visualize", "Render mask overlays for a manifest");
  add_common(visualize, common);
  add_keyed(visualize, common, "--manifest", "visualize.manifest", "manifest.json from annotate");
  add_keyed(visualize, common, "--alpha", "visualize.alpha", "Fill opacity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return sopseg::run_guarded(
      [&] {
        const auto cfg = resolve(common);
        if (synth->parsed()) {
          const auto s = sopseg::cmd_synth(cfg);
          std::cout << "train: " << s.train_instances << " instances in " << s.train_images << " images -> "
                    << s.train_file.string() << "\n"
                    << "val:   " << s.val_instances << " instances in " << s.val_images << " images -> "
                    << s.val_file.string() << "\n";
        } else if (train->parsed()) {
          const auto r = sopseg::cmd_train(cfg);
          std::cout << "epochs " << r.epochs_completed << ", steps " << r.steps << ", best val mIoU "
                    << r.best_val_miou << "\nbest checkpoint: " << r.best_checkpoint.string() << "\n";
        } else if (eval->parsed()) {
          std::cout << sopseg::cmd_eval(cfg).to_table();
        } else if (infer->parsed()) {
          const auto r = sopseg::cmd_infer(cfg);
          std::cout << "p_iou " << r.p_iou << ", mask area " << r.mask.area() << "\n";
        } else if (annotate->parsed()) {
          const auto s = sopseg::cmd_annotate(cfg);
          std::cout << s.annotated << " annotated, " << s.flagged << " flagged for review, " << s.skipped
                    << " skipped\nmanifest: " << s.manifest.string() << "\n";
        } else if (visualize->parsed()) {
          std::cout << sopseg::cmd_visualize(cfg).size() << " overlays written\n";
        }
      },
      std::cerr);
}
