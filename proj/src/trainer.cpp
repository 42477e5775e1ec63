#include "sopseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>

#include "sopseg/errors.hpp"

namespace sopseg {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(lr_decoder > 0) || !(lr_refine > 0)) throw ConfigError("learning rates must be positive");
  if (epochs <= 0) throw ConfigError("train.epochs must be positive");
  if (batch_size <= 0 || eval_batch_size <= 0) throw ConfigError("batch sizes must be positive");
  if (!(lambda_iou >= 0)) throw ConfigError("train.lambda_iou must be non-negative");
  if (!(weight_decay >= 0)) throw ConfigError("train.weight_decay must be non-negative");
  if (anneal_steps < 0) throw ConfigError("train.anneal_steps must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr_decoder", lr_decoder},
          {"lr_refine", lr_refine},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"lambda_iou", lambda_iou},
          {"weight_decay", weight_decay},
          {"anneal_steps", anneal_steps},
          {"seed", seed},
          {"edge_supervision", edge_supervision},
          {"freeze_backbone", freeze_backbone},
          {"freeze_prompt_encoder", freeze_prompt_encoder},
          {"stop_at_miou", stop_at_miou}};
}

double cosine_lr(double base, std::int64_t step, std::int64_t horizon) {
  if (horizon <= 0 || step >= horizon) return step <= 0 ? base : 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(horizon);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::int64_t steps_per_epoch(std::size_t samples, int batch_size) {
  return (static_cast<std::int64_t>(samples) + batch_size - 1) / batch_size;
}

void apply_freeze(SopSegModelImpl& model, const TrainConfig& cfg) {
  const bool frozen = model.config().backend == Backend::Frozen;
  set_group_trainable(model, ParamGroup::Backbone, !(frozen || cfg.freeze_backbone));
  set_group_trainable(model, ParamGroup::Prompt, !(frozen || cfg.freeze_prompt_encoder));
  set_group_trainable(model, ParamGroup::Decoder, true);
  set_group_trainable(model, ParamGroup::Refine, true);
}

std::unique_ptr<torch::optim::AdamW> make_optimizer(SopSegModelImpl& model, const TrainConfig& cfg) {
  std::vector<torch::Tensor> decoder_params, refine_params;
  for (auto& item : model.named_parameters()) {
    if (!item.value().requires_grad()) continue;
    (param_group(item.key()) == ParamGroup::Refine ? refine_params : decoder_params).push_back(item.value());
  }
  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(decoder_params);
  groups.emplace_back(refine_params);
  auto opt = std::make_unique<torch::optim::AdamW>(
      groups, torch::optim::AdamWOptions(cfg.lr_decoder).weight_decay(cfg.weight_decay));
  const double rates[2] = {cfg.lr_decoder, cfg.lr_refine};
  for (std::size_t i = 0; i < 2; ++i) {
    opt->param_groups()[i].set_options(std::make_unique<torch::optim::AdamWOptions>(
        torch::optim::AdamWOptions(rates[i]).weight_decay(cfg.weight_decay)));
  }
  return opt;
}

namespace {

void set_group_lr(torch::optim::AdamW& opt, std::size_t group, double lr) {
  static_cast<torch::optim::AdamWOptions&>(opt.param_groups()[group].options()).lr(lr);
}

std::string loss_summary(const LossBreakdown& lb) {
  std::string s = "mask=[";
  for (double v : lb.mask) s += std::to_string(v) + " ";
  s += "] edge=[";
  for (double v : lb.edge) s += std::to_string(v) + " ";
  return s + "] iou=" + std::to_string(lb.iou);
}

}  // namespace

LossBreakdown train_step(SopSegModel& model, torch::optim::AdamW& opt, const PatchBatch& batch,
                         const LossConfig& loss_cfg) {
  if (!batch.masks.defined()) throw DataError("training batch lacks ground-truth masks");
  model->train();
  opt.zero_grad();
  const auto dtype = model->parameters().front().scalar_type();
  const auto out = model->forward(batch.images.to(dtype), batch.prompt);
  auto lb = multi_scale_loss(out, batch.masks.to(dtype), loss_cfg);
  if (!std::isfinite(lb.total)) throw NumericalError("non-finite training loss: " + loss_summary(lb));
  lb.objective.backward();
  opt.step();
  return lb;
}

std::vector<std::int64_t> optimizer_steps(const SopSegModelImpl& model, const torch::optim::AdamW& opt) {
  std::vector<std::int64_t> steps;
  const auto& state = opt.state();
  for (const auto& p : model.parameters()) {
    const auto it = state.find(p.unsafeGetTensorImpl());
    if (it == state.end()) continue;
    steps.push_back(static_cast<const torch::optim::AdamWParamState&>(*it->second).step());
  }
  return steps;
}

void save_checkpoint(const fs::path& path, const SopSegModelImpl& model, const torch::optim::AdamW& opt,
                     const nlohmann::json& loop_state) {
  TensorArchive archive;
  archive.metadata = loop_state;
  archive.metadata["kind"] = "sopseg-checkpoint";
  archive.metadata["model_config"] = model.config().to_json();
  store_weights(model, archive);
  nlohmann::json steps = nlohmann::json::object();
  const auto& state = opt.state();
  for (const auto& item : model.named_parameters()) {
    const auto it = state.find(item.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& st = static_cast<const torch::optim::AdamWParamState&>(*it->second);
    archive.tensors["optim/" + item.key() + "/exp_avg"] = from_torch(st.exp_avg());
    archive.tensors["optim/" + item.key() + "/exp_avg_sq"] = from_torch(st.exp_avg_sq());
    steps[item.key()] = st.step();
  }
  archive.metadata["optimizer_steps"] = steps;
  const fs::path tmp = path.string() + ".tmp";
  archive.save(tmp);
  fs::rename(tmp, path);
}

nlohmann::json load_checkpoint(const fs::path& path, SopSegModelImpl& model, torch::optim::AdamW& opt) {
  const auto archive = TensorArchive::load(path);
  if (!archive.metadata.contains("model_config")) throw DataError(path.string() + " is not a checkpoint");
  const auto saved = ModelConfig::from_json(archive.metadata.at("model_config"));
  if (saved.to_json() != model.config().to_json()) {
    throw ConfigError("checkpoint " + path.string() + " was written for a different model configuration");
  }
  load_weights(model, archive);
  const auto steps = archive.metadata.value("optimizer_steps", nlohmann::json::object());
  auto& state = opt.state();
  torch::NoGradGuard guard;
  for (auto& item : model.named_parameters()) {
    if (!steps.contains(item.key())) continue;
    const auto& p = item.value();
    auto st = std::make_unique<torch::optim::AdamWParamState>();
    st->step(steps.at(item.key()).get<std::int64_t>());
    st->exp_avg(to_torch(archive.tensors.at("optim/" + item.key() + "/exp_avg")).to(p.dtype()));
    st->exp_avg_sq(to_torch(archive.tensors.at("optim/" + item.key() + "/exp_avg_sq")).to(p.dtype()));
    state[p.unsafeGetTensorImpl()] = std::move(st);
  }
  return archive.metadata;
}

FitResult fit(SopSegModel model, const std::vector<SampleRecord>& train, const std::vector<SampleRecord>& val,
              const TrainConfig& cfg, const PatchOptions& patch_opts, const fs::path& out_dir) {
  cfg.validate();
  if (train.empty()) throw DataError("training set is empty");
  fs::create_directories(out_dir);

  apply_freeze(*model, cfg);
  auto opt = make_optimizer(*model, cfg);
  const LossConfig loss_cfg{cfg.lambda_iou, cfg.edge_supervision};
  const std::int64_t per_epoch = steps_per_epoch(train.size(), cfg.batch_size);
  const std::int64_t horizon = cfg.anneal_steps > 0 ? cfg.anneal_steps : per_epoch * cfg.epochs;

  FitResult result;
  result.metrics_log = out_dir / "metrics.jsonl";
  result.last_checkpoint = out_dir / "last.ckpt";
  int start_epoch = 0;
  std::int64_t step = 0;
  if (!cfg.resume.empty()) {
    const auto st = load_checkpoint(cfg.resume, *model, *opt);
    start_epoch = st.at("epoch").get<int>() + 1;
    step = st.at("step").get<std::int64_t>();
    result.best_val_miou = st.value("best_val_miou", -1.0);
    if (st.contains("best_checkpoint")) result.best_checkpoint = st.at("best_checkpoint").get<std::string>();
  }
  result.steps = step;
  result.epochs_completed = start_epoch;

  const auto val_samples = build_eval_samples(val, patch_opts);
  std::ofstream log(result.metrics_log, start_epoch > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write " + result.metrics_log.string());

  std::vector<std::size_t> order(train.size());
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq shuffle_seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                              0x5eedu, static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 shuffle_rng(shuffle_seq);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double sum_total = 0.0, sum_mask = 0.0, sum_edge = 0.0, sum_iou = 0.0;
    std::int64_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - i);
      std::vector<PatchSample> samples;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = order[i + k];
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(idx)};
        std::mt19937_64 rng(seq);
        if (auto ps = build_patch_sample(train[idx], patch_opts, PatchMode::Train, rng)) {
          samples.push_back(std::move(*ps));
        }
      }
      set_group_lr(*opt, 0, cosine_lr(cfg.lr_decoder, step, horizon));
      set_group_lr(*opt, 1, cosine_lr(cfg.lr_refine, step, horizon));
      ++step;
      if (samples.empty()) continue;
      LossBreakdown lb;
      try {
        lb = train_step(model, *opt, stack_patches(samples), loss_cfg);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step - 1) + ")");
      }
      sum_total += lb.total;
      for (int s = 0; s < 3; ++s) {
        sum_mask += lb.mask[s];
        sum_edge += lb.edge[s];
      }
      sum_iou += lb.iou;
      ++batches;
    }
    result.steps = step;
    result.epochs_completed = epoch + 1;

    nlohmann::json entry = {{"epoch", epoch},
                            {"steps", step},
                            {"lr_decoder", cosine_lr(cfg.lr_decoder, step, horizon)},
                            {"lr_refine", cosine_lr(cfg.lr_refine, step, horizon)}};
    const double nb = std::max<std::int64_t>(batches, 1);
    entry["loss"] = {{"total", sum_total / nb}, {"mask", sum_mask / nb}, {"edge", sum_edge / nb},
                     {"iou", sum_iou / nb}};
    bool improved = false;
    if (!val_samples.empty()) {
      const auto report = evaluate(model_predictor(model), val_samples, cfg.eval_batch_size, cfg.dilation_ratio);
      result.last_val_miou = report.miou;
      result.last_val_mbiou = report.mbiou;
      entry["val_miou"] = report.miou;
      entry["val_mbiou"] = report.mbiou;
      improved = report.miou > result.best_val_miou;
      if (improved) result.best_val_miou = report.miou;
    }
    entry["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << entry.dump() << "\n";
    log.flush();
    if (cfg.verbose) std::cerr << entry.dump() << "\n";

    nlohmann::json loop = {{"epoch", epoch},
                           {"step", step},
                           {"best_val_miou", result.best_val_miou},
                           {"train_config", cfg.to_json()}};
    if (improved) {
      result.best_checkpoint = out_dir / "best.ckpt";
      loop["best_checkpoint"] = result.best_checkpoint.string();
      save_checkpoint(result.best_checkpoint, *model, *opt, loop);
    } else if (!result.best_checkpoint.empty()) {
      loop["best_checkpoint"] = result.best_checkpoint.string();
    }
    save_checkpoint(result.last_checkpoint, *model, *opt, loop);

    if (cfg.stop_at_miou > 0 && result.last_val_miou >= cfg.stop_at_miou) {
      result.stopped_early = epoch + 1 < cfg.epochs;
      break;
    }
  }
  if (result.best_checkpoint.empty()) result.best_checkpoint = result.last_checkpoint;
  return result;
}

}  // namespace sopseg
