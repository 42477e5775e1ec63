// Batched inference over patch samples and metric aggregation.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "sopseg/metrics.hpp"
#include "sopseg/model.hpp"
#include "sopseg/patch.hpp"

namespace sopseg {

struct Prediction {
  Mask mask;  ///< s_in x s_in crop-space mask
  double p_iou = 0.0;
};

/// Maps a batch of patches to one prediction each.
using Predictor = std::function<std::vector<Prediction>(std::span<const PatchSample>)>;

/// Network-ready tensors for a batch of patches.
struct PatchBatch {
  torch::Tensor images;  ///< (B, 3, S, S)
  PromptTensors prompt;
  torch::Tensor masks;   ///< (B, 1, S, S) float; undefined when any sample lacks a mask
};

PatchBatch stack_patches(std::span<const PatchSample> samples);

/// Eval-mode, no-grad model inference with the logit-0 threshold.
Predictor model_predictor(SopSegModel model);

/// Eval-mode patches (a = 0.5, no flip) for every non-degenerate record.
std::vector<PatchSample> build_eval_samples(const std::vector<SampleRecord>& records, const PatchOptions& opts);

std::vector<InstanceScore> score_instances(const Predictor& predict, const std::vector<PatchSample>& samples,
                                           int batch_size, double dilation_ratio = kDefaultDilationRatio);

/// Throws DataError on an empty sample list.
EvalReport evaluate(const Predictor& predict, const std::vector<PatchSample>& samples, int batch_size,
                    double dilation_ratio = kDefaultDilationRatio);

}  // namespace sopseg
