// Small building blocks shared by the encoder and decoder.

#pragma once

#include <torch/torch.h>

namespace sopseg {

/// Multi-head attention with an optional internal width reduction.
class AttentionImpl : public torch::nn::Module {
 public:
  AttentionImpl(int dim, int heads, int downsample = 1);

  /// q: (B, Nq, dim), k/v: (B, Nk, dim) -> (B, Nq, dim)
  torch::Tensor forward(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v);

  torch::nn::Linear q_proj{nullptr}, k_proj{nullptr}, v_proj{nullptr}, out_proj{nullptr};

 private:
  int heads_;
  int internal_;
};
TORCH_MODULE(Attention);

enum class Activation { Relu, Gelu };

/// Linear -> activation -> Linear.
class FeedForwardImpl : public torch::nn::Module {
 public:
  FeedForwardImpl(int dim, int hidden, Activation act);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};

 private:
  Activation act_;
};
TORCH_MODULE(FeedForward);

/// `layers` Linear layers with ReLU between them.
class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(int in, int hidden, int out, int layers);
  torch::Tensor forward(torch::Tensor x);

 private:
  std::vector<torch::nn::Linear> fcs_;
};
TORCH_MODULE(Mlp);

/// Channel LayerNorm for (B, C, H, W) maps.
class LayerNorm2dImpl : public torch::nn::Module {
 public:
  explicit LayerNorm2dImpl(int channels, double eps = 1e-6);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight, bias;

 private:
  double eps_;
};
TORCH_MODULE(LayerNorm2d);

/// Bilinear resize of (B, C, H, W) with aligned corners.
torch::Tensor resize_aligned(const torch::Tensor& x, int64_t h, int64_t w);

/// Largest group count <= 8 that divides `channels`.
int group_count(int channels);

}  // namespace sopseg
