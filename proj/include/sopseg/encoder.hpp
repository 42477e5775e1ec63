// Plain ViT image encoder with a shallow feature tap and resizable positional grid.

#pragma once

#include <torch/torch.h>

#include "sopseg/nn_layers.hpp"
#include "sopseg/pe_grid.hpp"

namespace sopseg {

struct EncoderConfig {
  int width = 192;
  int depth = 4;
  int heads = 3;
  int mlp_ratio = 4;
  int shallow_tap = 0;       ///< block whose output becomes f_shallow
  int pe_source_side = 256;  ///< input side the learned grid is stored at
};

/// Both maps are (B, C, side / 16, side / 16).
struct EncoderOutput {
  torch::Tensor f_deep;
  torch::Tensor f_shallow;
};

class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(int width, int heads, int mlp_ratio);
  torch::Tensor forward(const torch::Tensor& tokens);

 private:
  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  Attention attn{nullptr};
  FeedForward mlp{nullptr};
};
TORCH_MODULE(EncoderBlock);

class ImageEncoderImpl : public torch::nn::Module {
 public:
  explicit ImageEncoderImpl(const EncoderConfig& cfg);

  /// image: (B, 3, side, side) with side == expected_side. Throws ShapeError
  /// on non-square or mismatched input, ConfigError when side % 16 != 0.
  EncoderOutput forward(const torch::Tensor& image, int expected_side);

  /// Positional grid resampled for `side` (differentiable), (1, g, g, C).
  torch::Tensor positional_grid(int side) const;

  PeGrid pe_grid() const;
  void set_pe_grid(const PeGrid& grid);

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  torch::nn::Conv2d patch_embed{nullptr};
  torch::Tensor pos_embed;  // (1, g, g, C)
  std::vector<EncoderBlock> blocks_;
  torch::nn::LayerNorm out_norm{nullptr};
};
TORCH_MODULE(ImageEncoder);

}  // namespace sopseg
