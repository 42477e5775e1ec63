// Edge-aware two-way decoder (coarse mask + edge at 1/4) and the multi-scale
// refinement stage that lifts both predictions to full input resolution.

#pragma once

#include <torch/torch.h>

#include "sopseg/nn_layers.hpp"

namespace sopseg {

struct DecoderConfig {
  int dim = 192;            ///< token / feature width, equals the encoder width
  int depth = 2;            ///< two-way blocks
  int heads = 4;
  int mlp_dim = 512;
  int attn_downsample = 2;  ///< internal width reduction of cross attention
  int refine_channels = 32;
};

struct TwoWayOutput {
  torch::Tensor t_mask;       ///< (B, C)
  torch::Tensor t_edge;       ///< (B, C)
  torch::Tensor tokens;       ///< (B, 2 + prompt tokens, C), all updated tokens
  torch::Tensor f_deep_attn;  ///< (B, C, g, g)
};

struct CoarseOutputs {
  torch::Tensor m0;  ///< (B, 1, S/4, S/4) logits
  torch::Tensor e0;  ///< (B, 1, S/4, S/4) logits
};

/// Channel 0 is the mask, channel 1 the edge; logits.
struct PyramidOutputs {
  torch::Tensor p4;     ///< (B, 2, S/4, S/4)
  torch::Tensor p2;     ///< (B, 2, S/2, S/2)
  torch::Tensor p1;     ///< (B, 2, S, S)
  torch::Tensor x1;     ///< (B, Cr, S, S) final refined feature
  torch::Tensor p_iou;      ///< (B) in [0, 1]; undefined until predict_iou ran
  torch::Tensor iou_logit;  ///< (B) pre-sigmoid score
  CoarseOutputs coarse;
};

/// Pre-norm two-way block: token self-attention, token->image attention,
/// token MLP, image->token attention, each with a residual connection.
class TwoWayBlockImpl : public torch::nn::Module {
 public:
  TwoWayBlockImpl(int dim, int heads, int mlp_dim, int downsample);

  /// queries (B, N, C), keys (B, HW, C) -> updated (queries, keys).
  std::pair<torch::Tensor, torch::Tensor> forward(torch::Tensor queries, torch::Tensor keys,
                                                  const torch::Tensor& query_pe, const torch::Tensor& key_pe);

  Attention self_attn{nullptr}, token_to_image{nullptr}, image_to_token{nullptr};
  FeedForward mlp{nullptr};

 private:
  torch::nn::LayerNorm norm_self{nullptr}, norm_q1{nullptr}, norm_k1{nullptr}, norm_mlp{nullptr},
      norm_q2{nullptr}, norm_k2{nullptr};
};
TORCH_MODULE(TwoWayBlock);

class TwoWayTransformerImpl : public torch::nn::Module {
 public:
  explicit TwoWayTransformerImpl(const DecoderConfig& cfg);

  /// image (B, C, g, g), image_pe (1, C, g, g), tokens (B, N, C)
  /// -> (tokens (B, N, C), image (B, g*g, C))
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& image, const torch::Tensor& image_pe,
                                                  const torch::Tensor& tokens);

  std::vector<TwoWayBlock> blocks;
  Attention final_attn{nullptr};

 private:
  torch::nn::LayerNorm norm_q{nullptr}, norm_k{nullptr};
};
TORCH_MODULE(TwoWayTransformer);

/// Upscales 1/16 features by 4x to C/8 channels (SAM output-upscaling pattern).
class UpscalerImpl : public torch::nn::Module {
 public:
  explicit UpscalerImpl(int dim);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::ConvTranspose2d up1{nullptr}, up2{nullptr};
  LayerNorm2d norm{nullptr};
};
TORCH_MODULE(Upscaler);

class MaskDecoderImpl : public torch::nn::Module {
 public:
  explicit MaskDecoderImpl(const DecoderConfig& cfg);

  /// f_enc (B, C, g, g) image features (dense prompt already added),
  /// image_pe (1, C, g, g), prompt (B, P, C).
  TwoWayOutput two_way_decode(const torch::Tensor& f_enc, const torch::Tensor& image_pe,
                              const torch::Tensor& prompt);

  /// Hypernetwork heads: token MLP output dotted with the upscaled features.
  CoarseOutputs coarse_heads(const torch::Tensor& t_mask, const torch::Tensor& t_edge,
                             const torch::Tensor& f_deep_attn);

  torch::Tensor mask_token, edge_token;  // (1, C)
  TwoWayTransformer transformer{nullptr};
  Mlp mask_mlp{nullptr}, edge_mlp{nullptr};
  Upscaler mask_upscale{nullptr}, edge_upscale{nullptr};

 private:
  int dim_;
};
TORCH_MODULE(MaskDecoder);

/// Upsample to the target side, two 3x3 conv + GroupNorm (+ ReLU) with a residual skip.
class RefineBlockImpl : public torch::nn::Module {
 public:
  RefineBlockImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x, int64_t side);

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
};
TORCH_MODULE(RefineBlock);

/// Conv 3x3 -> GroupNorm -> ReLU -> 2x upsample.
class FeatureProjectorImpl : public torch::nn::Module {
 public:
  FeatureProjectorImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv{nullptr};
  torch::nn::GroupNorm norm{nullptr};
};
TORCH_MODULE(FeatureProjector);

class RefinerImpl : public torch::nn::Module {
 public:
  explicit RefinerImpl(const DecoderConfig& cfg);

  /// Both (B, C, g, g) -> (B, Cr, 2g, 2g).
  std::pair<torch::Tensor, torch::Tensor> project_features(const torch::Tensor& f_shallow,
                                                           const torch::Tensor& f_deep_attn);

  /// image (B, 3, S, S), coarse predictions at S/4. Fills p4, p2, p1, x1.
  PyramidOutputs refine(const torch::Tensor& f8s, const torch::Tensor& f8d, const torch::Tensor& image,
                        const CoarseOutputs& coarse);

  /// conv -> ReLU -> global average pool -> linear, (B).
  torch::Tensor iou_logit(const torch::Tensor& x1);
  /// sigmoid(iou_logit), (B).
  torch::Tensor predict_iou(const torch::Tensor& x1);

  FeatureProjector proj_shallow{nullptr}, proj_deep{nullptr};
  RefineBlock r1{nullptr}, r2{nullptr}, r3{nullptr};
  torch::nn::Conv2d head1{nullptr}, head2{nullptr}, head3{nullptr};
  torch::nn::Conv2d iou_conv{nullptr};
  torch::nn::Linear iou_fc{nullptr};
};
TORCH_MODULE(Refiner);

}  // namespace sopseg
