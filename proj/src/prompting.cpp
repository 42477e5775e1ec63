#include "sopseg/prompting.hpp"

#include <numbers>

#include "sopseg/errors.hpp"

namespace sopseg {

const std::vector<TokenRole>& prompt_roles() {
  static const std::vector<TokenRole> roles = {TokenRole::BoxTopLeft, TokenRole::BoxBottomRight,
                                               TokenRole::ForegroundPoint, TokenRole::ForegroundPoint,
                                               TokenRole::ForegroundPoint};
  return roles;
}

PromptTensors make_prompt_tensors(const std::vector<PromptBundle>& bundles) {
  const auto n = static_cast<int64_t>(bundles.size());
  auto boxes = torch::empty({n, 4}, torch::kFloat32);
  auto points = torch::empty({n, 3, 2}, torch::kFloat32);
  auto b = boxes.accessor<float, 2>();
  auto p = points.accessor<float, 3>();
  for (int64_t i = 0; i < n; ++i) {
    const PromptBundle& pb = bundles[i];
    b[i][0] = static_cast<float>(pb.box.x);
    b[i][1] = static_cast<float>(pb.box.y);
    b[i][2] = static_cast<float>(pb.box.right());
    b[i][3] = static_cast<float>(pb.box.bottom());
    const Point2 pts[3] = {pb.points.p1, pb.points.c, pb.points.p2};
    for (int k = 0; k < 3; ++k) {
      p[i][k][0] = static_cast<float>(pts[k].x);
      p[i][k][1] = static_cast<float>(pts[k].y);
    }
  }
  return {boxes, points};
}

PromptEncoderImpl::PromptEncoderImpl(int embed_dim) : dim_(embed_dim) {
  if (embed_dim % 2 != 0) throw ConfigError("prompt embedding width must be even");
  gaussian_ = register_buffer("gaussian", torch::randn({2, embed_dim / 2}));
  point_fg_ = register_parameter("point_fg", torch::randn({embed_dim}) * 0.1);
  box_tl_ = register_parameter("box_tl", torch::randn({embed_dim}) * 0.1);
  box_br_ = register_parameter("box_br", torch::randn({embed_dim}) * 0.1);
  no_mask_embed = register_parameter("no_mask", torch::randn({embed_dim}) * 0.1);
}

torch::Tensor PromptEncoderImpl::encode_normalized(const torch::Tensor& coords01) const {
  auto c = 2.0 * coords01 - 1.0;
  c = torch::matmul(c, gaussian_.to(c.dtype())) * (2.0 * std::numbers::pi);
  return torch::cat({torch::sin(c), torch::cos(c)}, -1);
}

torch::Tensor PromptEncoderImpl::encode_points(const torch::Tensor& points, int s_in) const {
  if (points.dim() != 3 || points.size(1) != 3 || points.size(2) != 2) {
    throw ShapeError("points must be (B, 3, 2)");
  }
  if (points.numel() > 0) {
    const double lo = points.min().item<double>();
    const double hi = points.max().item<double>();
    if (lo < 0.0 || hi > s_in) throw DomainError("prompt point outside [0, s_in]");
  }
  auto pe = encode_normalized(points / static_cast<double>(s_in));
  return pe + point_fg_.to(pe.dtype());
}

torch::Tensor PromptEncoderImpl::assemble(const PromptTensors& prompt, int s_in) const {
  const auto b = prompt.boxes.size(0);
  if (prompt.boxes.dim() != 2 || prompt.boxes.size(1) != 4 || prompt.points.size(0) != b) {
    throw ShapeError("prompt boxes must be (B, 4) matching the points batch");
  }
  const auto corners = prompt.boxes.clamp(0.0, static_cast<double>(s_in)).reshape({b, 2, 2});
  auto box_pe = encode_normalized(corners / static_cast<double>(s_in));
  const auto roles = torch::stack({box_tl_, box_br_}).to(box_pe.dtype());
  box_pe = box_pe + roles.unsqueeze(0);
  return torch::cat({box_pe, encode_points(prompt.points, s_in)}, 1);
}

torch::Tensor PromptEncoderImpl::dense_pe(int g) const {
  auto opts = torch::TensorOptions().dtype(point_fg_.dtype());
  const auto centers = (torch::arange(g, opts) + 0.5) / static_cast<double>(g);
  const auto yy = centers.view({g, 1}).expand({g, g});
  const auto xx = centers.view({1, g}).expand({g, g});
  const auto grid = torch::stack({xx, yy}, -1);  // (g, g, 2)
  return encode_normalized(grid).permute({2, 0, 1}).unsqueeze(0);
}

torch::Tensor encode_points(PromptEncoder& enc, const PromptPoints& pts, int s_in) {
  PromptBundle bundle{{0, 0, 1, 1}, pts};
  return enc->encode_points(make_prompt_tensors({bundle}).points, s_in).squeeze(0);
}

torch::Tensor assemble_prompt(PromptEncoder& enc, const HBox& box, const PromptPoints& pts, int s_in) {
  return enc->assemble(make_prompt_tensors({PromptBundle{box, pts}}), s_in).squeeze(0);
}

}  // namespace sopseg
