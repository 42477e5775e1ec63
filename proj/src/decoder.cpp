#include "sopseg/decoder.hpp"

#include "sopseg/errors.hpp"

namespace sopseg {

namespace F = torch::nn::functional;

namespace {

torch::nn::LayerNorm make_norm(int dim) { return torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})); }

torch::nn::Conv2d conv3x3(int in, int out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::Tensor add_pe(const torch::Tensor& x, const torch::Tensor& pe) { return pe.defined() ? x + pe : x; }

}  // namespace

TwoWayBlockImpl::TwoWayBlockImpl(int dim, int heads, int mlp_dim, int downsample) {
  norm_self = register_module("norm_self", make_norm(dim));
  self_attn = register_module("self_attn", Attention(dim, heads));
  norm_q1 = register_module("norm_q1", make_norm(dim));
  norm_k1 = register_module("norm_k1", make_norm(dim));
  token_to_image = register_module("token_to_image", Attention(dim, heads, downsample));
  norm_mlp = register_module("norm_mlp", make_norm(dim));
  mlp = register_module("mlp", FeedForward(dim, mlp_dim, Activation::Relu));
  norm_q2 = register_module("norm_q2", make_norm(dim));
  norm_k2 = register_module("norm_k2", make_norm(dim));
  image_to_token = register_module("image_to_token", Attention(dim, heads, downsample));
}

std::pair<torch::Tensor, torch::Tensor> TwoWayBlockImpl::forward(torch::Tensor queries, torch::Tensor keys,
                                                                 const torch::Tensor& query_pe,
                                                                 const torch::Tensor& key_pe) {
  auto q = add_pe(norm_self(queries), query_pe);
  queries = queries + self_attn(q, q, norm_self(queries));

  auto qn = norm_q1(queries);
  auto kn = norm_k1(keys);
  queries = queries + token_to_image(add_pe(qn, query_pe), add_pe(kn, key_pe), kn);

  queries = queries + mlp(norm_mlp(queries));

  qn = norm_q2(queries);
  kn = norm_k2(keys);
  keys = keys + image_to_token(add_pe(kn, key_pe), add_pe(qn, query_pe), qn);
  return {queries, keys};
}

TwoWayTransformerImpl::TwoWayTransformerImpl(const DecoderConfig& cfg) {
  for (int i = 0; i < cfg.depth; ++i) {
    blocks.push_back(register_module("blocks_" + std::to_string(i),
                                     TwoWayBlock(cfg.dim, cfg.heads, cfg.mlp_dim, cfg.attn_downsample)));
  }
  norm_q = register_module("norm_q", make_norm(cfg.dim));
  norm_k = register_module("norm_k", make_norm(cfg.dim));
  final_attn = register_module("final_attn", Attention(cfg.dim, cfg.heads, cfg.attn_downsample));
}

std::pair<torch::Tensor, torch::Tensor> TwoWayTransformerImpl::forward(const torch::Tensor& image,
                                                                       const torch::Tensor& image_pe,
                                                                       const torch::Tensor& tokens) {
  const auto b = image.size(0);
  auto keys = image.flatten(2).permute({0, 2, 1});
  const auto key_pe = image_pe.flatten(2).permute({0, 2, 1}).expand({b, -1, -1});
  auto queries = tokens;
  for (auto& blk : blocks) std::tie(queries, keys) = blk(queries, keys, tokens, key_pe);
  const auto qn = norm_q(queries);
  const auto kn = norm_k(keys);
  queries = queries + final_attn(qn + tokens, kn + key_pe, kn);
  return {queries, keys};
}

UpscalerImpl::UpscalerImpl(int dim) {
  if (dim % 8 != 0) throw ConfigError("decoder width must be divisible by 8");
  up1 = register_module("up1", torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(dim, dim / 4, 2).stride(2)));
  norm = register_module("norm", LayerNorm2d(dim / 4));
  up2 = register_module("up2",
                        torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(dim / 4, dim / 8, 2).stride(2)));
}

torch::Tensor UpscalerImpl::forward(const torch::Tensor& x) {
  return F::gelu(up2(F::gelu(norm(up1(x)))));
}

MaskDecoderImpl::MaskDecoderImpl(const DecoderConfig& cfg) : dim_(cfg.dim) {
  mask_token = register_parameter("mask_token", torch::randn({1, cfg.dim}) * 0.1);
  edge_token = register_parameter("edge_token", torch::randn({1, cfg.dim}) * 0.1);
  transformer = register_module("transformer", TwoWayTransformer(cfg));
  mask_mlp = register_module("mask_mlp", Mlp(cfg.dim, cfg.dim, cfg.dim / 8, 3));
  edge_mlp = register_module("edge_mlp", Mlp(cfg.dim, cfg.dim, cfg.dim / 8, 3));
  mask_upscale = register_module("mask_upscale", Upscaler(cfg.dim));
  edge_upscale = register_module("edge_upscale", Upscaler(cfg.dim));
}

TwoWayOutput MaskDecoderImpl::two_way_decode(const torch::Tensor& f_enc, const torch::Tensor& image_pe,
                                             const torch::Tensor& prompt) {
  if (f_enc.dim() != 4 || f_enc.size(1) != dim_ || prompt.dim() != 3 || prompt.size(2) != dim_ ||
      prompt.size(0) != f_enc.size(0)) {
    throw ShapeError("two_way_decode: feature/prompt widths must equal the decoder width");
  }
  const auto b = f_enc.size(0);
  const auto own = torch::cat({mask_token, edge_token}, 0).to(prompt.dtype()).unsqueeze(0).expand({b, -1, -1});
  const auto tokens = torch::cat({own, prompt}, 1);
  auto [out_tokens, keys] = transformer(f_enc, image_pe, tokens);
  const auto g = f_enc.size(2);
  TwoWayOutput out;
  out.tokens = out_tokens;
  out.t_mask = out_tokens.select(1, 0);
  out.t_edge = out_tokens.select(1, 1);
  out.f_deep_attn = keys.permute({0, 2, 1}).reshape({b, dim_, g, f_enc.size(3)});
  return out;
}

CoarseOutputs MaskDecoderImpl::coarse_heads(const torch::Tensor& t_mask, const torch::Tensor& t_edge,
                                            const torch::Tensor& f_deep_attn) {
  auto head = [](const torch::Tensor& hyper, const torch::Tensor& up) {
    return (hyper.unsqueeze(-1).unsqueeze(-1) * up).sum(1, true);
  };
  return {head(mask_mlp(t_mask), mask_upscale(f_deep_attn)), head(edge_mlp(t_edge), edge_upscale(f_deep_attn))};
}

RefineBlockImpl::RefineBlockImpl(int in_channels, int out_channels) {
  conv1 = register_module("conv1", conv3x3(in_channels, out_channels));
  norm1 = register_module("norm1", torch::nn::GroupNorm(group_count(out_channels), out_channels));
  conv2 = register_module("conv2", conv3x3(out_channels, out_channels));
  norm2 = register_module("norm2", torch::nn::GroupNorm(group_count(out_channels), out_channels));
  if (in_channels != out_channels) {
    skip = register_module("skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1)));
  }
}

torch::Tensor RefineBlockImpl::forward(const torch::Tensor& x, int64_t side) {
  const auto u = resize_aligned(x, side, side);
  auto h = torch::relu(norm1(conv1(u)));
  h = norm2(conv2(h));
  return torch::relu(h + (skip ? skip(u) : u));
}

FeatureProjectorImpl::FeatureProjectorImpl(int in_channels, int out_channels) {
  conv = register_module("conv", conv3x3(in_channels, out_channels));
  norm = register_module("norm", torch::nn::GroupNorm(group_count(out_channels), out_channels));
}

torch::Tensor FeatureProjectorImpl::forward(const torch::Tensor& x) {
  const auto y = torch::relu(norm(conv(x)));
  return resize_aligned(y, 2 * y.size(2), 2 * y.size(3));
}

RefinerImpl::RefinerImpl(const DecoderConfig& cfg) {
  const int cr = cfg.refine_channels;
  proj_shallow = register_module("proj_shallow", FeatureProjector(cfg.dim, cr));
  proj_deep = register_module("proj_deep", FeatureProjector(cfg.dim, cr));
  r1 = register_module("r1", RefineBlock(2 * cr + 3 + 2, cr));
  r2 = register_module("r2", RefineBlock(cr + 3 + 2, cr));
  r3 = register_module("r3", RefineBlock(cr + 3 + 2, cr));
  head1 = register_module("head1", conv3x3(cr, 2));
  head2 = register_module("head2", conv3x3(cr, 2));
  head3 = register_module("head3", conv3x3(cr, 2));
  iou_conv = register_module("iou_conv", conv3x3(cr, cr));
  iou_fc = register_module("iou_fc", torch::nn::Linear(cr, 1));
}

std::pair<torch::Tensor, torch::Tensor> RefinerImpl::project_features(const torch::Tensor& f_shallow,
                                                                      const torch::Tensor& f_deep_attn) {
  if (f_shallow.sizes() != f_deep_attn.sizes()) throw ShapeError("shallow and deep features must share a shape");
  return {proj_shallow(f_shallow), proj_deep(f_deep_attn)};
}

PyramidOutputs RefinerImpl::refine(const torch::Tensor& f8s, const torch::Tensor& f8d, const torch::Tensor& image,
                                   const CoarseOutputs& coarse) {
  const auto side = image.size(2);
  if (image.size(3) != side || side % 8 != 0 || f8s.size(2) * 8 != side || coarse.m0.size(2) * 4 != side) {
    throw ShapeError("refine: image, features and coarse predictions disagree on scale");
  }
  const auto p0 = torch::cat({coarse.m0, coarse.e0}, 1);
  auto at = [&](const torch::Tensor& t, int64_t s) { return resize_aligned(t, s, s); };

  PyramidOutputs out;
  out.coarse = coarse;
  const auto x4 = r1(torch::cat({f8s, f8d, at(image, side / 8), at(p0, side / 8)}, 1), side / 4);
  out.p4 = head1(x4);
  const auto x2 = r2(torch::cat({x4, at(image, side / 4), out.p4}, 1), side / 2);
  out.p2 = head2(x2);
  out.x1 = r3(torch::cat({x2, at(image, side / 2), out.p2}, 1), side);
  out.p1 = head3(out.x1);
  return out;
}

torch::Tensor RefinerImpl::iou_logit(const torch::Tensor& x1) {
  auto h = torch::relu(iou_conv(x1));
  h = F::adaptive_avg_pool2d(h, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
  return iou_fc(h).squeeze(-1);
}

torch::Tensor RefinerImpl::predict_iou(const torch::Tensor& x1) { return torch::sigmoid(iou_logit(x1)); }

}  // namespace sopseg
