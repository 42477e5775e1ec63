#include "sopseg/nn_layers.hpp"

#include <cmath>

#include "sopseg/errors.hpp"

namespace sopseg {

namespace F = torch::nn::functional;

AttentionImpl::AttentionImpl(int dim, int heads, int downsample) : heads_(heads), internal_(dim / downsample) {
  if (downsample <= 0 || dim % downsample != 0 || internal_ % heads != 0) {
    throw ConfigError("attention width " + std::to_string(dim) + " incompatible with heads/downsample");
  }
  q_proj = register_module("q_proj", torch::nn::Linear(dim, internal_));
  k_proj = register_module("k_proj", torch::nn::Linear(dim, internal_));
  v_proj = register_module("v_proj", torch::nn::Linear(dim, internal_));
  out_proj = register_module("out_proj", torch::nn::Linear(internal_, dim));
}

torch::Tensor AttentionImpl::forward(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v) {
  auto split = [this](const torch::Tensor& x) {
    const auto b = x.size(0), n = x.size(1);
    return x.reshape({b, n, heads_, internal_ / heads_}).transpose(1, 2);
  };
  const auto qh = split(q_proj(q));
  const auto kh = split(k_proj(k));
  const auto vh = split(v_proj(v));
  const double scale = 1.0 / std::sqrt(static_cast<double>(internal_ / heads_));
  const auto attn = torch::softmax(torch::matmul(qh, kh.transpose(-2, -1)) * scale, -1);
  auto out = torch::matmul(attn, vh).transpose(1, 2).reshape({q.size(0), q.size(1), internal_});
  return out_proj(out);
}

FeedForwardImpl::FeedForwardImpl(int dim, int hidden, Activation act) : act_(act) {
  fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor FeedForwardImpl::forward(const torch::Tensor& x) {
  auto h = fc1(x);
  h = act_ == Activation::Gelu ? F::gelu(h) : torch::relu(h);
  return fc2(h);
}

MlpImpl::MlpImpl(int in, int hidden, int out, int layers) {
  for (int i = 0; i < layers; ++i) {
    const int a = i == 0 ? in : hidden;
    const int b = i + 1 == layers ? out : hidden;
    fcs_.push_back(register_module("layers_" + std::to_string(i), torch::nn::Linear(a, b)));
  }
}

torch::Tensor MlpImpl::forward(torch::Tensor x) {
  for (std::size_t i = 0; i < fcs_.size(); ++i) {
    x = fcs_[i](x);
    if (i + 1 < fcs_.size()) x = torch::relu(x);
  }
  return x;
}

LayerNorm2dImpl::LayerNorm2dImpl(int channels, double eps) : eps_(eps) {
  weight = register_parameter("weight", torch::ones({channels}));
  bias = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor LayerNorm2dImpl::forward(const torch::Tensor& x) {
  const auto mean = x.mean(1, true);
  const auto var = (x - mean).pow(2).mean(1, true);
  const auto y = (x - mean) / torch::sqrt(var + eps_);
  return weight.view({1, -1, 1, 1}) * y + bias.view({1, -1, 1, 1});
}

torch::Tensor resize_aligned(const torch::Tensor& x, int64_t h, int64_t w) {
  if (x.size(2) == h && x.size(3) == w) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(true));
}

int group_count(int channels) {
  for (int g = 8; g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

}  // namespace sopseg
