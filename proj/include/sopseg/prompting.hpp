// Prompt encoder: random-Fourier positional codes plus learned role embeddings.

#pragma once

#include <vector>

#include <torch/torch.h>

#include "sopseg/geometry.hpp"

namespace sopseg {

enum class TokenRole { BoxTopLeft, BoxBottomRight, ForegroundPoint };

/// Token order of an assembled prompt: [box-tl, box-br, P1, C, P2].
inline constexpr int kPromptTokens = 5;
const std::vector<TokenRole>& prompt_roles();

/// Crop-space prompt geometry for a batch.
struct PromptTensors {
  torch::Tensor boxes;   ///< (B, 4) x0, y0, x1, y1
  torch::Tensor points;  ///< (B, 3, 2) P1, C, P2
};

PromptTensors make_prompt_tensors(const std::vector<PromptBundle>& bundles);

class PromptEncoderImpl : public torch::nn::Module {
 public:
  explicit PromptEncoderImpl(int embed_dim);

  /// Fourier code of coordinates already divided by the input side, (..., 2) -> (..., C).
  torch::Tensor encode_normalized(const torch::Tensor& coords01) const;

  /// (B, 3, 2) crop-space points -> (B, 3, C). Throws DomainError when any
  /// coordinate lies outside [0, s_in].
  torch::Tensor encode_points(const torch::Tensor& points, int s_in) const;

  /// Box corners are clipped to the patch; output (B, 5, C) in prompt_roles() order.
  torch::Tensor assemble(const PromptTensors& prompt, int s_in) const;

  /// Positional code of every feature cell center, (1, C, g, g).
  torch::Tensor dense_pe(int g) const;

  torch::Tensor no_mask_embed;  ///< (C) added to every image feature cell

 private:
  int dim_;
  torch::Tensor gaussian_;  // (2, C/2), fixed
  torch::Tensor point_fg_, box_tl_, box_br_;
};
TORCH_MODULE(PromptEncoder);

/// Convenience: encodes one point triple (3, C).
torch::Tensor encode_points(PromptEncoder& enc, const PromptPoints& pts, int s_in);

/// Convenience: one assembled prompt (5, C).
torch::Tensor assemble_prompt(PromptEncoder& enc, const HBox& box, const PromptPoints& pts, int s_in);

}  // namespace sopseg
