#include "sopseg/losses.hpp"

#include <cmath>

#include "sopseg/errors.hpp"

namespace sopseg {

namespace F = torch::nn::functional;

namespace {

void check_pair(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) throw ShapeError(std::string(what) + ": prediction and target shapes differ");
}

void check_mask4(const torch::Tensor& m) {
  if (m.dim() != 4 || m.size(1) != 1) throw ShapeError("masks must be (B, 1, H, W)");
}

}  // namespace

std::array<double, 9> gaussian3x3(double sigma) {
  std::array<double, 9> k{};
  double sum = 0.0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      k[(dy + 1) * 3 + dx + 1] = v;
      sum += v;
    }
  }
  for (double& v : k) v /= sum;
  return k;
}

torch::Tensor edge_target(const torch::Tensor& mask) {
  check_mask4(mask);
  torch::NoGradGuard guard;
  const auto m = (mask > 0.5).to(mask.scalar_type() == torch::kFloat64 ? torch::kFloat64 : torch::kFloat32);
  const auto padded = F::pad(m, F::PadFuncOptions({1, 1, 1, 1}));
  const auto dilated = F::max_pool2d(padded, F::MaxPool2dFuncOptions(3).stride(1));
  const auto eroded = -F::max_pool2d(-padded, F::MaxPool2dFuncOptions(3).stride(1));
  const auto gradient = dilated - eroded;
  const auto g = gaussian3x3();
  auto kernel = torch::empty({1, 1, 3, 3}, torch::TensorOptions().dtype(torch::kFloat64));
  for (int i = 0; i < 9; ++i) kernel.view({9})[i] = g[i];
  const auto blurred = F::conv2d(gradient, kernel.to(m.dtype()), F::Conv2dFuncOptions().padding(1));
  return blurred.clamp(0.0, 1.0).to(mask.dtype());
}

torch::Tensor bce_term(const torch::Tensor& logits, const torch::Tensor& target) {
  check_pair(logits, target, "bce");
  return F::binary_cross_entropy_with_logits(logits, target.to(logits.dtype()));
}

torch::Tensor dice_term(const torch::Tensor& logits, const torch::Tensor& target) {
  check_pair(logits, target, "dice");
  const auto b = logits.size(0);
  const auto p = torch::sigmoid(logits).reshape({b, -1});
  const auto t = target.to(logits.dtype()).reshape({b, -1});
  const auto inter = (p * t).sum(1);
  const auto denom = p.sum(1) + t.sum(1) + kDiceEps;
  return (1.0 - 2.0 * inter / denom).mean();
}

torch::Tensor bce_dice(const torch::Tensor& logits, const torch::Tensor& target) {
  return bce_term(logits, target) + dice_term(logits, target);
}

torch::Tensor iou_loss(const torch::Tensor& p_iou, const torch::Tensor& actual) {
  check_pair(p_iou, actual, "iou_loss");
  return F::smooth_l1_loss(p_iou, actual.to(p_iou.dtype()), F::SmoothL1LossFuncOptions().beta(1.0));
}

torch::Tensor actual_iou(const torch::Tensor& mask_logits, const torch::Tensor& target) {
  check_pair(mask_logits, target, "actual_iou");
  torch::NoGradGuard guard;
  const auto b = mask_logits.size(0);
  const auto pred = (mask_logits > 0).reshape({b, -1});
  const auto gt = (target > 0.5).reshape({b, -1});
  const auto inter = (pred & gt).sum(1).to(torch::kFloat64);
  const auto uni = (pred | gt).sum(1).to(torch::kFloat64);
  const auto iou = torch::where(uni > 0, inter / uni.clamp_min(1.0), torch::ones_like(uni));
  return iou.to(mask_logits.dtype());
}

torch::Tensor downsample_mask(const torch::Tensor& mask, int64_t side) {
  check_mask4(mask);
  torch::NoGradGuard guard;
  if (mask.size(2) == side && mask.size(3) == side) return (mask > 0.5).to(mask.dtype());
  const auto r = F::interpolate(mask, F::InterpolateFuncOptions()
                                          .size(std::vector<int64_t>{side, side})
                                          .mode(torch::kBilinear)
                                          .align_corners(false));
  return (r >= 0.5).to(mask.dtype());
}

double LossBreakdown::compose(const std::array<double, 3>& mask, const std::array<double, 3>& edge, double iou,
                              double lambda_iou) {
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) sum += mask[i] + edge[i];
  return sum + lambda_iou * iou;
}

LossBreakdown multi_scale_loss(const PyramidOutputs& out, const torch::Tensor& gt_mask, const LossConfig& cfg) {
  check_mask4(gt_mask);
  if (!out.p_iou.defined()) throw ShapeError("multi_scale_loss needs the IoU head output");
  const torch::Tensor preds[3] = {out.p1, out.p2, out.p4};
  const auto gt = gt_mask.to(out.p1.dtype());

  LossBreakdown lb;
  lb.lambda_iou = cfg.lambda_iou;
  torch::Tensor parts = torch::zeros({}, out.p1.options());
  for (int i = 0; i < 3; ++i) {
    const auto& p = preds[i];
    if (p.dim() != 4 || p.size(1) != 2) throw ShapeError("pyramid outputs must have 2 channels");
    const auto target = downsample_mask(gt, p.size(2));
    const auto mask_loss = bce_dice(p.narrow(1, 0, 1), target);
    lb.mask[i] = mask_loss.item<double>();
    torch::Tensor scale = mask_loss;
    if (cfg.edge_supervision) {
      const auto edge_loss = bce_dice(p.narrow(1, 1, 1), edge_target(target));
      lb.edge[i] = edge_loss.item<double>();
      scale = scale + edge_loss;
    }
    parts = parts + scale;
  }
  lb.actual_iou = actual_iou(out.p1.narrow(1, 0, 1), gt);
  const auto l_iou = iou_loss(out.p_iou, lb.actual_iou);
  lb.iou = l_iou.item<double>();
  lb.objective = parts + cfg.lambda_iou * l_iou;
  lb.total = LossBreakdown::compose(lb.mask, lb.edge, lb.iou, lb.lambda_iou);
  return lb;
}

}  // namespace sopseg
