#include "sopseg/model.hpp"

#include <cstring>

#include "sopseg/errors.hpp"

namespace sopseg {

std::string to_string(Backend b) { return b == Backend::Frozen ? "frozen" : "tiny"; }

Backend backend_from_string(const std::string& s) {
  if (s == "tiny") return Backend::Tiny;
  if (s == "frozen") return Backend::Frozen;
  throw ConfigError("unknown encoder backend '" + s + "' (expected tiny or frozen)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"s_in", s_in},
          {"backend", to_string(backend)},
          {"encoder",
           {{"width", encoder.width},
            {"depth", encoder.depth},
            {"heads", encoder.heads},
            {"mlp_ratio", encoder.mlp_ratio},
            {"shallow_tap", encoder.shallow_tap},
            {"pe_source_side", encoder.pe_source_side}}},
          {"decoder",
           {{"depth", decoder.depth},
            {"heads", decoder.heads},
            {"mlp_dim", decoder.mlp_dim},
            {"attn_downsample", decoder.attn_downsample},
            {"refine_channels", decoder.refine_channels}}}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.s_in = j.at("s_in").get<int>();
    c.backend = backend_from_string(j.at("backend").get<std::string>());
    const auto& e = j.at("encoder");
    c.encoder.width = e.at("width").get<int>();
    c.encoder.depth = e.at("depth").get<int>();
    c.encoder.heads = e.at("heads").get<int>();
    c.encoder.mlp_ratio = e.at("mlp_ratio").get<int>();
    c.encoder.shallow_tap = e.at("shallow_tap").get<int>();
    c.encoder.pe_source_side = e.at("pe_source_side").get<int>();
    const auto& d = j.at("decoder");
    c.decoder.depth = d.at("depth").get<int>();
    c.decoder.heads = d.at("heads").get<int>();
    c.decoder.mlp_dim = d.at("mlp_dim").get<int>();
    c.decoder.attn_downsample = d.at("attn_downsample").get<int>();
    c.decoder.refine_channels = d.at("refine_channels").get<int>();
    c.decoder.dim = c.encoder.width;
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed model config: ") + ex.what());
  }
}

void ModelConfig::validate() const {
  if (s_in <= 0 || s_in % kPatchStride != 0) throw ConfigError("s_in must be a positive multiple of 16");
  if (encoder.width <= 0 || encoder.width % 8 != 0) throw ConfigError("encoder width must be a multiple of 8");
  if (encoder.heads <= 0 || encoder.width % encoder.heads != 0) throw ConfigError("encoder heads must divide width");
  if (decoder.depth <= 0 || decoder.heads <= 0 || decoder.mlp_dim <= 0 || decoder.refine_channels <= 0) {
    throw ConfigError("decoder sizes must be positive");
  }
}

SopSegModelImpl::SopSegModelImpl(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.decoder.dim = cfg_.encoder.width;
  cfg_.validate();
  encoder = register_module("encoder", ImageEncoder(cfg_.encoder));
  prompt_encoder = register_module("prompt_encoder", PromptEncoder(cfg_.encoder.width));
  decoder = register_module("decoder", MaskDecoder(cfg_.decoder));
  refiner = register_module("refiner", Refiner(cfg_.decoder));
}

PyramidOutputs SopSegModelImpl::forward(const torch::Tensor& image, const PromptTensors& prompt) {
  const auto enc = encoder(image, cfg_.s_in);
  const auto opts = image.options();
  const PromptTensors p{prompt.boxes.to(opts), prompt.points.to(opts)};
  const auto tokens = prompt_encoder->assemble(p, cfg_.s_in);
  const auto src = enc.f_deep + prompt_encoder->no_mask_embed.view({1, -1, 1, 1});
  const auto pe = prompt_encoder->dense_pe(static_cast<int>(enc.f_deep.size(2)));
  const auto tw = decoder->two_way_decode(src, pe, tokens);
  const auto coarse = decoder->coarse_heads(tw.t_mask, tw.t_edge, tw.f_deep_attn);
  const auto [f8s, f8d] = refiner->project_features(enc.f_shallow, tw.f_deep_attn);
  auto out = refiner->refine(f8s, f8d, image, coarse);
  out.iou_logit = refiner->iou_logit(out.x1);
  out.p_iou = torch::sigmoid(out.iou_logit);
  return out;
}

torch::Tensor binarize_mask(const PyramidOutputs& out) { return out.p1.select(1, 0) > 0; }

ParamGroup param_group(const std::string& name) {
  auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
  if (starts("encoder.")) return ParamGroup::Backbone;
  if (starts("prompt_encoder.")) return ParamGroup::Prompt;
  if (starts("decoder.")) return ParamGroup::Decoder;
  if (starts("refiner.")) return ParamGroup::Refine;
  throw ConfigError("parameter '" + name + "' belongs to no group");
}

void set_group_trainable(SopSegModelImpl& model, ParamGroup group, bool trainable) {
  for (auto& item : model.named_parameters()) {
    if (param_group(item.key()) == group) item.value().set_requires_grad(trainable);
  }
}

std::uint64_t group_checksum(const SopSegModelImpl& model, ParamGroup group) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& item : model.named_parameters()) {
    if (param_group(item.key()) != group) continue;
    const auto t = item.value().detach().contiguous().cpu();
    const auto* bytes = static_cast<const unsigned char*>(t.data_ptr());
    const auto n = t.numel() * static_cast<int64_t>(t.element_size());
    for (int64_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

torch::Tensor to_torch(const ArchiveTensor& t) {
  auto out = torch::empty(t.shape, torch::kFloat32);
  if (!t.values.empty()) std::memcpy(out.data_ptr<float>(), t.values.data(), t.values.size() * sizeof(float));
  return out;
}

ArchiveTensor from_torch(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat32).contiguous().cpu();
  ArchiveTensor a;
  a.shape.assign(c.sizes().begin(), c.sizes().end());
  a.values.assign(c.data_ptr<float>(), c.data_ptr<float>() + c.numel());
  return a;
}

void store_weights(const SopSegModelImpl& model, TensorArchive& archive, const std::string& prefix) {
  for (const auto& item : model.named_parameters()) archive.tensors[prefix + item.key()] = from_torch(item.value());
  for (const auto& item : model.named_buffers()) archive.tensors[prefix + item.key()] = from_torch(item.value());
}

std::size_t load_weights(SopSegModelImpl& model, const TensorArchive& archive, const std::string& prefix,
                         bool strict) {
  torch::NoGradGuard guard;
  std::size_t loaded = 0;
  auto load_into = [&](const std::string& name, torch::Tensor& dst) {
    const auto it = archive.tensors.find(prefix + name);
    if (it == archive.tensors.end()) {
      if (strict) throw DataError("checkpoint is missing tensor '" + prefix + name + "'");
      return;
    }
    const auto src = to_torch(it->second);
    if (src.sizes() != dst.sizes()) throw DataError("checkpoint tensor '" + prefix + name + "' has the wrong shape");
    dst.copy_(src.to(dst.dtype()));
    ++loaded;
  };
  for (auto& item : model.named_parameters()) load_into(item.key(), item.value());
  for (auto& item : model.named_buffers()) load_into(item.key(), item.value());
  return loaded;
}

SopSegModel build_model(const ModelConfig& cfg, const std::filesystem::path& backbone_weights) {
  SopSegModel model(cfg);
  if (cfg.backend == Backend::Frozen) {
    if (backbone_weights.empty()) throw ConfigError("frozen backend requires model.backbone_weights");
    const auto archive = TensorArchive::load(backbone_weights);
    TensorArchive subset;
    for (const auto& [name, t] : archive.tensors) {
      const auto key = name.rfind("model/", 0) == 0 ? name.substr(6) : name;
      const auto g = key.rfind("encoder.", 0) == 0 || key.rfind("prompt_encoder.", 0) == 0;
      if (g) subset.tensors["model/" + key] = t;
    }
    SopSegModel probe(cfg);
    std::size_t expected = 0;
    for (const auto& item : probe->named_parameters()) {
      const auto grp = param_group(item.key());
      expected += grp == ParamGroup::Backbone || grp == ParamGroup::Prompt;
    }
    for (const auto& item : probe->named_buffers()) {
      expected += item.key().rfind("encoder.", 0) == 0 || item.key().rfind("prompt_encoder.", 0) == 0;
    }
    const auto loaded = load_weights(*model, subset, "model/", false);
    if (loaded != expected) {
      throw DataError("backbone archive provides " + std::to_string(loaded) + " of " + std::to_string(expected) +
                      " encoder/prompt tensors");
    }
    set_group_trainable(*model, ParamGroup::Backbone, false);
    set_group_trainable(*model, ParamGroup::Prompt, false);
  }
  return model;
}

void save_model(const SopSegModelImpl& model, const std::filesystem::path& path, const nlohmann::json& extra) {
  TensorArchive archive;
  archive.metadata = extra;
  archive.metadata["kind"] = "sopseg-model";
  archive.metadata["model_config"] = model.config().to_json();
  store_weights(model, archive);
  archive.save(path);
}

SopSegModel load_model(const std::filesystem::path& path) {
  const auto archive = TensorArchive::load(path);
  if (!archive.metadata.contains("model_config")) {
    throw DataError("checkpoint " + path.string() + " carries no model config");
  }
  auto cfg = ModelConfig::from_json(archive.metadata.at("model_config"));
  // Weights are restored in full, so the backbone archive is not needed again.
  const bool frozen = cfg.backend == Backend::Frozen;
  SopSegModel model(cfg);
  load_weights(*model, archive);
  if (frozen) {
    set_group_trainable(*model, ParamGroup::Backbone, false);
    set_group_trainable(*model, ParamGroup::Prompt, false);
  }
  return model;
}

}  // namespace sopseg
