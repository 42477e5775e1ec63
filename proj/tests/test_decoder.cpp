#include <gtest/gtest.h>

#include <filesystem>

#include "nn_fixtures.hpp"
#include "sopseg/decoder.hpp"
#include "sopseg/errors.hpp"
#include "sopseg/model.hpp"

using namespace sopseg;
namespace fs = std::filesystem;

namespace {

void zero_parameters(torch::nn::Module& m) {
  torch::NoGradGuard ng;
  for (auto& p : m.parameters()) p.zero_();
}

DecoderConfig micro_decoder() {
  DecoderConfig d = fixtures::micro_config().decoder;
  d.dim = 32;
  return d;
}

}  // namespace

TEST(Decoder, ZeroedAttentionPassesTokensThrough) {
  torch::manual_seed(0);
  MaskDecoder dec(micro_decoder());
  for (auto& blk : dec->transformer->blocks) {
    zero_parameters(*blk->self_attn);
    zero_parameters(*blk->token_to_image);
    zero_parameters(*blk->image_to_token);
    zero_parameters(*blk->mlp->fc2);
  }
  zero_parameters(*dec->transformer->final_attn);
  const auto f = torch::randn({2, 32, 4, 4});
  const auto pe = torch::randn({1, 32, 4, 4});
  const auto prompt = torch::randn({2, 5, 32});
  const auto out = dec->two_way_decode(f, pe, prompt);
  ASSERT_EQ(out.tokens.sizes(), (std::vector<int64_t>{2, 7, 32}));
  EXPECT_TRUE(torch::equal(out.t_mask, dec->mask_token.expand({2, 32})));
  EXPECT_TRUE(torch::equal(out.t_edge, dec->edge_token.expand({2, 32})));
  EXPECT_TRUE(torch::equal(out.tokens.slice(1, 2, 7), prompt));
  EXPECT_TRUE(torch::equal(out.f_deep_attn, f));
}

TEST(Decoder, TwoWayShapesAndErrors) {
  MaskDecoder dec(micro_decoder());
  const auto out = dec->two_way_decode(torch::randn({3, 32, 8, 8}), torch::randn({1, 32, 8, 8}), torch::randn({3, 5, 32}));
  EXPECT_EQ(out.t_mask.sizes(), (std::vector<int64_t>{3, 32}));
  EXPECT_EQ(out.t_edge.sizes(), (std::vector<int64_t>{3, 32}));
  EXPECT_EQ(out.f_deep_attn.sizes(), (std::vector<int64_t>{3, 32, 8, 8}));
  EXPECT_THROW(dec->two_way_decode(torch::randn({1, 16, 8, 8}), torch::randn({1, 16, 8, 8}), torch::randn({1, 5, 16})),
               ShapeError);
}

TEST(Decoder, CoarseHeadsZeroTokenAndIndependence) {
  torch::manual_seed(1);
  MaskDecoder dec(micro_decoder());
  {
    torch::NoGradGuard ng;
    for (auto& item : dec->mask_mlp->named_parameters()) {
    const auto& name = item.key();
    auto& p = item.value();
      if (name.find("bias") != std::string::npos) p.zero_();
    }
  }
  const auto f = torch::randn({2, 32, 4, 4});
  const auto t_mask = torch::randn({2, 32}), t_edge = torch::randn({2, 32});
  const auto base = dec->coarse_heads(t_mask, t_edge, f);
  EXPECT_EQ(base.m0.sizes(), (std::vector<int64_t>{2, 1, 16, 16}));
  EXPECT_EQ(base.e0.sizes(), base.m0.sizes());

  const auto zero = dec->coarse_heads(torch::zeros({2, 32}), t_edge, f);
  EXPECT_EQ(zero.m0.abs().max().item<float>(), 0.0f);

  const auto changed = dec->coarse_heads(t_mask, t_edge + 1.0, f);
  EXPECT_TRUE(torch::equal(changed.m0, base.m0));
  EXPECT_FALSE(torch::equal(changed.e0, base.e0));
}

TEST(Decoder, ProjectFeaturesAndRefineShapes) {
  torch::manual_seed(2);
  Refiner ref(micro_decoder());
  const auto [f8s, f8d] = ref->project_features(torch::randn({2, 32, 16, 16}), torch::randn({2, 32, 16, 16}));
  EXPECT_EQ(f8s.sizes(), (std::vector<int64_t>{2, 8, 32, 32}));
  EXPECT_EQ(f8d.sizes(), f8s.sizes());
  EXPECT_TRUE(torch::isfinite(f8s).all().item<bool>());
  const CoarseOutputs coarse{torch::randn({2, 1, 64, 64}), torch::randn({2, 1, 64, 64})};
  const auto out = ref->refine(f8s, f8d, torch::randn({2, 3, 256, 256}), coarse);
  EXPECT_EQ(out.p4.sizes(), (std::vector<int64_t>{2, 2, 64, 64}));
  EXPECT_EQ(out.p2.sizes(), (std::vector<int64_t>{2, 2, 128, 128}));
  EXPECT_EQ(out.p1.sizes(), (std::vector<int64_t>{2, 2, 256, 256}));
  EXPECT_EQ(out.x1.sizes(), (std::vector<int64_t>{2, 8, 256, 256}));
}

TEST(Decoder, IouHeadRangeAndZeroFeature) {
  torch::manual_seed(3);
  Refiner ref(micro_decoder());
  torch::NoGradGuard ng;
  const auto p = ref->predict_iou(torch::randn({64, 8, 16, 16}) * 100.0);
  EXPECT_EQ(p.sizes(), (std::vector<int64_t>{64}));
  EXPECT_GE(p.min().item<float>(), 0.0f);
  EXPECT_LE(p.max().item<float>(), 1.0f);
  // conv(0) = conv bias; ReLU and pooling keep it constant; the linear layer then applies.
  const auto h = torch::relu(ref->iou_conv->bias).view({1, -1});
  const auto expected = torch::sigmoid(ref->iou_fc(h)).squeeze(-1);
  EXPECT_TRUE(torch::allclose(ref->predict_iou(torch::zeros({1, 8, 16, 16})), expected, 1e-6, 1e-7));
}

TEST(Model, ShapePyramidTinyBackend) {
  for (int s_in : {128, 256}) {
    ModelConfig cfg;
    cfg.s_in = s_in;
    auto model = fixtures::seeded_model(cfg, 4);
    model->eval();
    torch::NoGradGuard ng;
    std::mt19937_64 rng(1);
    const auto out = model->forward(torch::randn({2, 3, s_in, s_in}), fixtures::random_prompts(2, s_in, rng));
    EXPECT_EQ(out.p4.sizes(), (std::vector<int64_t>{2, 2, s_in / 4, s_in / 4}));
    EXPECT_EQ(out.p2.sizes(), (std::vector<int64_t>{2, 2, s_in / 2, s_in / 2}));
    EXPECT_EQ(out.p1.sizes(), (std::vector<int64_t>{2, 2, s_in, s_in}));
    EXPECT_EQ(out.coarse.m0.sizes(), (std::vector<int64_t>{2, 1, s_in / 4, s_in / 4}));
    EXPECT_EQ(out.p_iou.sizes(), (std::vector<int64_t>{2}));
    EXPECT_TRUE(((out.p_iou >= 0) & (out.p_iou <= 1)).all().item<bool>());
  }
}

TEST(Model, EvalDeterminismAndBinarization) {
  auto model = fixtures::seeded_model(fixtures::micro_config(), 5);
  model->eval();
  torch::NoGradGuard ng;
  std::mt19937_64 rng(2);
  const auto img = torch::randn({2, 3, 64, 64});
  const auto prompt = fixtures::random_prompts(2, 64, rng);
  const auto a = model->forward(img, prompt), b = model->forward(img, prompt);
  EXPECT_TRUE(torch::equal(a.p1, b.p1));
  EXPECT_TRUE(torch::equal(a.p_iou, b.p_iou));
  const auto mask = binarize_mask(a);
  EXPECT_EQ(mask.sizes(), (std::vector<int64_t>{2, 64, 64}));
  EXPECT_TRUE(torch::equal(mask, a.p1.select(1, 0) > 0));
}

TEST(Model, BatchEqualsSingles) {
  auto model = fixtures::seeded_model(fixtures::micro_config(), 6);
  model->eval();
  torch::NoGradGuard ng;
  std::mt19937_64 rng(3);
  const auto img = torch::randn({3, 3, 64, 64});
  const auto prompt = fixtures::random_prompts(3, 64, rng);
  const auto all = model->forward(img, prompt);
  for (int b = 0; b < 3; ++b) {
    const auto one = model->forward(img.slice(0, b, b + 1),
                                    PromptTensors{prompt.boxes.slice(0, b, b + 1), prompt.points.slice(0, b, b + 1)});
    EXPECT_LT((one.p1[0] - all.p1[b]).abs().max().item<float>(), 1e-5f);
    EXPECT_LT((one.p_iou[0] - all.p_iou[b]).abs().item<float>(), 1e-5f);
  }
}

TEST(Model, GradientReachesFirstRefineBlock) {
  auto model = fixtures::seeded_model(fixtures::micro_config(), 7);
  std::mt19937_64 rng(4);
  const auto out = model->forward(torch::randn({1, 3, 64, 64}), fixtures::random_prompts(1, 64, rng));
  out.p1.select(1, 0).square().mean().backward();
  double r1_grad = 0.0;
  for (auto& p : model->refiner->r1->parameters()) r1_grad += p.grad().abs().sum().item<double>();
  EXPECT_GT(r1_grad, 0.0);
}

TEST(Model, ParamGroupsAndFreeze) {
  EXPECT_EQ(param_group("encoder.blocks_0.attn.q_proj.weight"), ParamGroup::Backbone);
  EXPECT_EQ(param_group("prompt_encoder.no_mask_embed"), ParamGroup::Prompt);
  EXPECT_EQ(param_group("decoder.mask_token"), ParamGroup::Decoder);
  EXPECT_EQ(param_group("refiner.r1.conv1.weight"), ParamGroup::Refine);
  auto model = fixtures::seeded_model(fixtures::micro_config());
  set_group_trainable(*model, ParamGroup::Backbone, false);
  for (auto& item : model->named_parameters()) {
    const auto& name = item.key();
    auto& p = item.value();
    EXPECT_EQ(p.requires_grad(), param_group(name) != ParamGroup::Backbone) << name;
  }
}

TEST(Model, SaveLoadRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "sopseg_test_model";
  fs::create_directories(dir);
  auto model = fixtures::seeded_model(fixtures::micro_config(), 8);
  save_model(*model, dir / "m.ckpt");
  auto back = load_model(dir / "m.ckpt");
  EXPECT_EQ(back->config().s_in, 64);
  EXPECT_EQ(back->config().encoder.width, 32);
  for (auto g : {ParamGroup::Backbone, ParamGroup::Prompt, ParamGroup::Decoder, ParamGroup::Refine}) {
    EXPECT_EQ(group_checksum(*back, g), group_checksum(*model, g));
  }
  TensorArchive wrong;
  wrong.tensors["model/decoder.mask_token"] = ArchiveTensor{{1, 3}, {0, 0, 0}};
  EXPECT_THROW(load_weights(*model, wrong, "model/", false), DataError);
  EXPECT_THROW(load_weights(*model, TensorArchive{}, "model/", true), DataError);
}

TEST(Model, FrozenBackendLoadsAndFreezes) {
  const fs::path dir = fs::temp_directory_path() / "sopseg_test_frozen";
  fs::create_directories(dir);
  auto donor = fixtures::seeded_model(fixtures::micro_config(), 9);
  TensorArchive weights;
  store_weights(*donor, weights, "model/");
  weights.save(dir / "backbone.bin");

  ModelConfig cfg = fixtures::micro_config();
  cfg.backend = Backend::Frozen;
  auto model = build_model(cfg, dir / "backbone.bin");
  EXPECT_EQ(group_checksum(*model, ParamGroup::Backbone), group_checksum(*donor, ParamGroup::Backbone));
  EXPECT_EQ(group_checksum(*model, ParamGroup::Prompt), group_checksum(*donor, ParamGroup::Prompt));
  for (auto& item : model->named_parameters()) {
    const auto& name = item.key();
    auto& p = item.value();
    const auto g = param_group(name);
    EXPECT_EQ(p.requires_grad(), g == ParamGroup::Decoder || g == ParamGroup::Refine) << name;
  }
  EXPECT_THROW(build_model(cfg, dir / "missing.bin"), DataError);
  EXPECT_EQ(backend_from_string("frozen"), Backend::Frozen);
  EXPECT_THROW(backend_from_string("sam"), ConfigError);
}
