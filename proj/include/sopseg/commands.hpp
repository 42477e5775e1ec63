// Subcommand implementations shared by the CLI and the tests. Each command
// reads a fully resolved RunConfig and writes run_config.json into its output
// directory (the "out" key).

#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sopseg/metrics.hpp"
#include "sopseg/model.hpp"
#include "sopseg/patch.hpp"
#include "sopseg/run_config.hpp"
#include "sopseg/synthetic.hpp"
#include "sopseg/trainer.hpp"

namespace sopseg {

RamParams ram_params_from(const RunConfig& cfg);
ModelConfig model_config_from(const RunConfig& cfg);
TrainConfig train_config_from(const RunConfig& cfg);
PatchOptions patch_options_from(const RunConfig& cfg);
SynthConfig synth_config_from(const RunConfig& cfg);

struct SynthSummary {
  std::filesystem::path train_file;
  std::filesystem::path val_file;
  std::size_t train_images = 0, train_instances = 0;
  std::size_t val_images = 0, val_instances = 0;
};

/// out/train.json and out/val.json with disjoint image and instance ids.
SynthSummary cmd_synth(const RunConfig& cfg);

/// Trains on data.train (validating on data.val when set) into out/.
FitResult cmd_train(const RunConfig& cfg);

/// Scores `checkpoint` on eval.data (default data.val); writes
/// eval_report.json, eval_report.txt and instance_scores.json.
EvalReport cmd_eval(const RunConfig& cfg);

struct InferResult {
  Mask mask;       ///< full image
  Mask crop_mask;  ///< s_in x s_in
  double p_iou = 0.0;
  CropWindow window;
};

/// Segments the object in infer.image given by infer.obb ("x1,y1,...,x4,y4");
/// writes out/mask.png and out/result.json.
InferResult cmd_infer(const RunConfig& cfg);

struct AnnotateSummary {
  std::filesystem::path manifest;
  std::filesystem::path review;
  std::size_t annotated = 0;
  std::size_t flagged = 0;
  std::size_t skipped = 0;
};

/// Box-only annotation file (annotate.input) -> masks, manifest.json,
/// review_flagged.json (p_iou < annotate.tau), review/<id>.png overlays and
/// skipped.json. The input file is only read.
AnnotateSummary cmd_annotate(const RunConfig& cfg);

/// Overlay PNGs for visualize.manifest, one per image.
std::vector<std::filesystem::path> cmd_visualize(const RunConfig& cfg);

/// 2 config, 3 data (also domain/shape), 4 numerical, 1 anything else.
int exit_code_for(const std::exception& e);

/// Runs `fn`, prints "error: ..." to `err` on failure and returns the exit code.
int run_guarded(const std::function<void()>& fn, std::ostream& err);

}  // namespace sopseg
