// AdamW training loop with two learning-rate groups, cosine annealing,
// per-epoch validation, JSON-lines metrics and resumable checkpoints.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "sopseg/annotations.hpp"
#include "sopseg/evaluate.hpp"
#include "sopseg/losses.hpp"
#include "sopseg/model.hpp"
#include "sopseg/patch.hpp"

namespace sopseg {

struct TrainConfig {
  double lr_decoder = 5e-5;
  double lr_refine = 1e-3;
  int epochs = 32;
  int batch_size = 8;
  double lambda_iou = 5.0;
  double weight_decay = 0.01;
  std::int64_t anneal_steps = 0;  ///< cosine horizon; 0 means the full run
  std::uint64_t seed = 0;
  bool edge_supervision = true;
  bool freeze_backbone = false;
  bool freeze_prompt_encoder = false;
  double stop_at_miou = 0.0;      ///< stop once val mIoU reaches this; 0 disables
  int eval_batch_size = 8;
  double dilation_ratio = kDefaultDilationRatio;
  std::filesystem::path resume;   ///< checkpoint to continue from
  bool verbose = false;

  void validate() const;
  nlohmann::json to_json() const;
};

struct FitResult {
  int epochs_completed = 0;
  std::int64_t steps = 0;
  double best_val_miou = -1.0;
  double last_val_miou = -1.0;
  double last_val_mbiou = -1.0;
  bool stopped_early = false;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path metrics_log;
};

/// base * (1 + cos(pi * step / horizon)) / 2, held at 0 past the horizon.
double cosine_lr(double base, std::int64_t step, std::int64_t horizon);

std::int64_t steps_per_epoch(std::size_t samples, int batch_size);

/// Optimizer over the trainable parameters: group 0 (encoder, prompt encoder,
/// decoder) at lr_decoder, group 1 (refinement + IoU head) at lr_refine.
std::unique_ptr<torch::optim::AdamW> make_optimizer(SopSegModelImpl& model, const TrainConfig& cfg);

/// Applies the freeze flags (and the frozen backend) to requires_grad.
void apply_freeze(SopSegModelImpl& model, const TrainConfig& cfg);

/// One forward/backward/update on a batch; throws NumericalError on a
/// non-finite loss before the update is applied.
LossBreakdown train_step(SopSegModel& model, torch::optim::AdamW& opt, const PatchBatch& batch,
                         const LossConfig& loss_cfg);

/// Training checkpoint: weights, AdamW moments and loop position.
void save_checkpoint(const std::filesystem::path& path, const SopSegModelImpl& model,
                     const torch::optim::AdamW& opt, const nlohmann::json& state);

/// Restores weights and optimizer moments, returns the saved loop state.
nlohmann::json load_checkpoint(const std::filesystem::path& path, SopSegModelImpl& model, torch::optim::AdamW& opt);

/// Per-parameter AdamW step counters (empty before the first update).
std::vector<std::int64_t> optimizer_steps(const SopSegModelImpl& model, const torch::optim::AdamW& opt);

/// Trains in place. Writes out_dir/metrics.jsonl (one object per epoch),
/// out_dir/last.ckpt and, with a validation set, out_dir/best.ckpt.
FitResult fit(SopSegModel model, const std::vector<SampleRecord>& train, const std::vector<SampleRecord>& val,
              const TrainConfig& cfg, const PatchOptions& patch_opts, const std::filesystem::path& out_dir);

}  // namespace sopseg
