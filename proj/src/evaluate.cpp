#include "sopseg/evaluate.hpp"

#include <algorithm>
#include <cstring>

#include "sopseg/errors.hpp"

namespace sopseg {

PatchBatch stack_patches(std::span<const PatchSample> samples) {
  if (samples.empty()) throw DataError("empty batch");
  const int s = samples.front().patch.width;
  const auto b = static_cast<int64_t>(samples.size());
  PatchBatch batch;
  batch.images = torch::empty({b, 3, s, s}, torch::kFloat32);
  bool has_masks = true;
  std::vector<PromptBundle> prompts;
  for (const PatchSample& ps : samples) {
    if (ps.patch.width != s || ps.patch.height != s || ps.patch.channels != 3) {
      throw ShapeError("patches in a batch must share one square size");
    }
    has_masks = has_masks && ps.gt_mask_patch.width == s && ps.gt_mask_patch.height == s;
    prompts.push_back(ps.prompt);
  }
  float* dst = batch.images.data_ptr<float>();
  for (const PatchSample& ps : samples) {
    std::memcpy(dst, ps.patch.data.data(), ps.patch.data.size() * sizeof(float));
    dst += ps.patch.data.size();
  }
  batch.prompt = make_prompt_tensors(prompts);
  if (has_masks) {
    batch.masks = torch::empty({b, 1, s, s}, torch::kFloat32);
    float* m = batch.masks.data_ptr<float>();
    for (const PatchSample& ps : samples) {
      for (auto v : ps.gt_mask_patch.data) *m++ = v ? 1.0f : 0.0f;
    }
  }
  return batch;
}

Predictor model_predictor(SopSegModel model) {
  return [model](std::span<const PatchSample> samples) mutable {
    torch::NoGradGuard guard;
    model->eval();
    const auto batch = stack_patches(samples);
    const auto dtype = model->parameters().front().scalar_type();
    const auto out = model->forward(batch.images.to(dtype), batch.prompt);
    const auto masks = binarize_mask(out).to(torch::kUInt8).contiguous();
    // Sigmoid in double keeps scores off the 0/1 endpoints for any realistic logit.
    const auto scores = torch::sigmoid(out.iou_logit.to(torch::kFloat64)).contiguous();
    const int s = static_cast<int>(masks.size(1));
    std::vector<Prediction> preds(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      preds[i].mask = Mask(s, s);
      std::memcpy(preds[i].mask.data.data(), masks[static_cast<int64_t>(i)].data_ptr<std::uint8_t>(),
                  static_cast<std::size_t>(s) * s);
      preds[i].p_iou = scores[static_cast<int64_t>(i)].item<double>();
    }
    return preds;
  };
}

std::vector<PatchSample> build_eval_samples(const std::vector<SampleRecord>& records, const PatchOptions& opts) {
  std::vector<PatchSample> out;
  out.reserve(records.size());
  std::mt19937_64 unused(0);
  for (const SampleRecord& rec : records) {
    if (auto ps = build_patch_sample(rec, opts, PatchMode::Eval, unused)) out.push_back(std::move(*ps));
  }
  return out;
}

std::vector<InstanceScore> score_instances(const Predictor& predict, const std::vector<PatchSample>& samples,
                                           int batch_size, double dilation_ratio) {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  std::vector<InstanceScore> scores;
  scores.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min<std::size_t>(batch_size, samples.size() - i);
    const std::span<const PatchSample> chunk(samples.data() + i, n);
    const auto preds = predict(chunk);
    if (preds.size() != n) throw ShapeError("predictor returned the wrong number of masks");
    for (std::size_t k = 0; k < n; ++k) {
      const PatchSample& ps = chunk[k];
      if (ps.gt_mask_patch.empty()) throw DataError("instance " + std::to_string(ps.instance_id) + " has no mask");
      InstanceScore sc;
      sc.instance_id = ps.instance_id;
      sc.class_label = ps.class_label;
      sc.iou = mask_iou(preds[k].mask, ps.gt_mask_patch);
      sc.biou = boundary_iou(preds[k].mask, ps.gt_mask_patch, dilation_ratio);
      sc.predicted_iou = preds[k].p_iou;
      scores.push_back(std::move(sc));
    }
  }
  return scores;
}

EvalReport evaluate(const Predictor& predict, const std::vector<PatchSample>& samples, int batch_size,
                    double dilation_ratio) {
  if (samples.empty()) throw DataError("evaluation set is empty");
  return aggregate(score_instances(predict, samples, batch_size, dilation_ratio));
}

}  // namespace sopseg
