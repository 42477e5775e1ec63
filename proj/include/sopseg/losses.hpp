// Edge ground truth and the multi-scale mask/edge/IoU training objective.

#pragma once

#include <array>

#include <torch/torch.h>

#include "sopseg/decoder.hpp"

namespace sopseg {

inline constexpr double kDiceEps = 1e-6;
inline constexpr double kEdgeSigma = 1.0;

/// Normalized 3x3 Gaussian kernel, row-major.
std::array<double, 9> gaussian3x3(double sigma = kEdgeSigma);

/// (B, 1, H, W) binary mask -> soft edge map: 3x3 morphological gradient
/// (pixels outside the raster count as background), 3x3 Gaussian blur with
/// zero padding, clipped to [0, 1].
torch::Tensor edge_target(const torch::Tensor& mask);

/// Mean pixel BCE on logits. Throws ShapeError on mismatched shapes.
torch::Tensor bce_term(const torch::Tensor& logits, const torch::Tensor& target);

/// 1 - 2 sum(pt) / (sum(p) + sum(t) + eps), per sample, averaged over the batch.
torch::Tensor dice_term(const torch::Tensor& logits, const torch::Tensor& target);

/// bce_term + dice_term.
torch::Tensor bce_dice(const torch::Tensor& logits, const torch::Tensor& target);

/// Smooth L1 with beta = 1, averaged.
torch::Tensor iou_loss(const torch::Tensor& p_iou, const torch::Tensor& actual_iou);

/// Per-sample IoU of (logits > 0) against a binary target, (B) without grad.
torch::Tensor actual_iou(const torch::Tensor& mask_logits, const torch::Tensor& target);

/// Mask target at a coarser side: bilinear (half-pixel) resize then >= 0.5.
torch::Tensor downsample_mask(const torch::Tensor& mask, int64_t side);

struct LossConfig {
  double lambda_iou = 5.0;
  bool edge_supervision = true;
};

/// Scale index 0, 1, 2 stands for P_1, P_2, P_4.
struct LossBreakdown {
  std::array<double, 3> mask{};
  std::array<double, 3> edge{};
  double iou = 0.0;
  double lambda_iou = 5.0;
  double total = 0.0;
  torch::Tensor objective;   ///< differentiable total
  torch::Tensor actual_iou;  ///< (B) regression target of the IoU head

  /// Fixed summation order shared by total and objective.
  static double compose(const std::array<double, 3>& mask, const std::array<double, 3>& edge, double iou,
                        double lambda_iou);
};

/// gt_mask: (B, 1, S, S) in {0, 1} at full patch resolution.
LossBreakdown multi_scale_loss(const PyramidOutputs& out, const torch::Tensor& gt_mask, const LossConfig& cfg);

}  // namespace sopseg
