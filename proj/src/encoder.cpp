#include "sopseg/encoder.hpp"

#include <string>

#include "sopseg/errors.hpp"

namespace sopseg {

EncoderBlockImpl::EncoderBlockImpl(int width, int heads, int mlp_ratio) {
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  attn = register_module("attn", Attention(width, heads));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  mlp = register_module("mlp", FeedForward(width, width * mlp_ratio, Activation::Gelu));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& tokens) {
  auto h = norm1(tokens);
  auto x = tokens + attn(h, h, h);
  return x + mlp(norm2(x));
}

ImageEncoderImpl::ImageEncoderImpl(const EncoderConfig& cfg) : cfg_(cfg) {
  if (cfg.depth <= 0 || cfg.shallow_tap < 0 || cfg.shallow_tap >= cfg.depth) {
    throw ConfigError("encoder shallow_tap must index one of the " + std::to_string(cfg.depth) + " blocks");
  }
  if (cfg.pe_source_side <= 0 || cfg.pe_source_side % kPatchStride != 0) {
    throw ConfigError("encoder pe_source_side must be a positive multiple of 16");
  }
  patch_embed = register_module(
      "patch_embed",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(3, cfg.width, kPatchStride).stride(kPatchStride)));
  const int g = cfg.pe_source_side / kPatchStride;
  pos_embed = register_parameter("pos_embed", torch::randn({1, g, g, cfg.width}) * 0.02);
  for (int i = 0; i < cfg.depth; ++i) {
    blocks_.push_back(
        register_module("blocks_" + std::to_string(i), EncoderBlock(cfg.width, cfg.heads, cfg.mlp_ratio)));
  }
  out_norm = register_module("out_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.width})));
}

torch::Tensor ImageEncoderImpl::positional_grid(int side) const {
  if (side <= 0 || side % kPatchStride != 0) {
    throw ConfigError("input side " + std::to_string(side) + " is not a positive multiple of 16");
  }
  if (side == cfg_.pe_source_side) return pos_embed;
  const int g = side / kPatchStride;
  auto chw = pos_embed.permute({0, 3, 1, 2});
  return resize_aligned(chw, g, g).permute({0, 2, 3, 1});
}

EncoderOutput ImageEncoderImpl::forward(const torch::Tensor& image, int expected_side) {
  if (image.dim() != 4 || image.size(1) != 3) throw ShapeError("encoder expects (B, 3, S, S) input");
  if (image.size(2) != image.size(3)) throw ShapeError("encoder input must be square");
  if (image.size(2) != expected_side) {
    throw ShapeError("encoder input side " + std::to_string(image.size(2)) + " != configured " +
                     std::to_string(expected_side));
  }
  const int side = static_cast<int>(image.size(2));
  auto x = patch_embed(image).permute({0, 2, 3, 1});  // (B, g, g, C)
  x = x + positional_grid(side);
  const auto b = x.size(0), g = x.size(1), c = x.size(3);
  auto tokens = x.reshape({b, g * g, c});
  torch::Tensor shallow;
  for (int i = 0; i < static_cast<int>(blocks_.size()); ++i) {
    tokens = blocks_[i](tokens);
    if (i == cfg_.shallow_tap) shallow = tokens;
  }
  auto to_map = [&](const torch::Tensor& t) { return t.reshape({b, g, g, c}).permute({0, 3, 1, 2}).contiguous(); };
  return {to_map(out_norm(tokens)), to_map(shallow)};
}

PeGrid ImageEncoderImpl::pe_grid() const {
  torch::NoGradGuard guard;
  const auto t = pos_embed.detach().to(torch::kFloat64).contiguous();
  PeGrid grid;
  grid.side = static_cast<int>(t.size(1));
  grid.channels = static_cast<int>(t.size(3));
  grid.source_side = cfg_.pe_source_side;
  grid.values.assign(t.data_ptr<double>(), t.data_ptr<double>() + t.numel());
  return grid;
}

void ImageEncoderImpl::set_pe_grid(const PeGrid& grid) {
  if (grid.source_side != cfg_.pe_source_side || grid.channels != cfg_.width) {
    throw ShapeError("positional grid does not match the encoder configuration");
  }
  torch::NoGradGuard guard;
  auto src = torch::from_blob(const_cast<double*>(grid.values.data()), {1, grid.side, grid.side, grid.channels},
                              torch::kFloat64);
  pos_embed.copy_(src.to(pos_embed.dtype()));
}

}  // namespace sopseg
