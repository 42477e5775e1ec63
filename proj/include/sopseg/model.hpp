// Full promptable segmenter: encoder -> prompt tokens -> two-way decoder ->
// coarse heads -> progressive refinement -> IoU head. Checkpoint helpers.

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "sopseg/decoder.hpp"
#include "sopseg/encoder.hpp"
#include "sopseg/prompting.hpp"
#include "sopseg/tensor_archive.hpp"

namespace sopseg {

enum class Backend { Tiny, Frozen };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& s);

struct ModelConfig {
  int s_in = 256;
  Backend backend = Backend::Tiny;
  EncoderConfig encoder;
  DecoderConfig decoder;  ///< decoder.dim is forced to encoder.width

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  void validate() const;
};

class SopSegModelImpl : public torch::nn::Module {
 public:
  explicit SopSegModelImpl(ModelConfig cfg);

  /// image (B, 3, s_in, s_in) normalized; prompt in crop coordinates.
  PyramidOutputs forward(const torch::Tensor& image, const PromptTensors& prompt);

  const ModelConfig& config() const { return cfg_; }

  ImageEncoder encoder{nullptr};
  PromptEncoder prompt_encoder{nullptr};
  MaskDecoder decoder{nullptr};
  Refiner refiner{nullptr};

 private:
  ModelConfig cfg_;
};
TORCH_MODULE(SopSegModel);

/// Binary output mask of P_1's mask channel: logit > 0.
torch::Tensor binarize_mask(const PyramidOutputs& out);

enum class ParamGroup { Backbone, Prompt, Decoder, Refine };

/// Group of a parameter by its registered name.
ParamGroup param_group(const std::string& name);

/// Sets requires_grad on every parameter of the group.
void set_group_trainable(SopSegModelImpl& model, ParamGroup group, bool trainable);

/// FNV-1a over the raw bytes of the group's parameters, for freeze checks.
std::uint64_t group_checksum(const SopSegModelImpl& model, ParamGroup group);

/// Copies parameters and buffers into archive entries "<prefix><name>".
void store_weights(const SopSegModelImpl& model, TensorArchive& archive, const std::string& prefix = "model/");

/// Loads matching entries; throws DataError on shape mismatch or, when
/// `strict`, on a missing entry. Returns the number of tensors loaded.
std::size_t load_weights(SopSegModelImpl& model, const TensorArchive& archive, const std::string& prefix = "model/",
                         bool strict = true);

torch::Tensor to_torch(const ArchiveTensor& t);
ArchiveTensor from_torch(const torch::Tensor& t);

/// Builds a model; the frozen backend reads encoder and prompt-encoder
/// weights from `backbone_weights` and freezes both groups.
SopSegModel build_model(const ModelConfig& cfg, const std::filesystem::path& backbone_weights = {});

/// Writes a weights-only archive with the config echo in its metadata.
void save_model(const SopSegModelImpl& model, const std::filesystem::path& path,
                const nlohmann::json& extra = nlohmann::json::object());

/// Rebuilds the model from a checkpoint's config echo and loads its weights.
SopSegModel load_model(const std::filesystem::path& path);

}  // namespace sopseg
