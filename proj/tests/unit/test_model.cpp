// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "aep/archive.hpp"
#include "aep/costmodel.hpp"
#include "aep/errors.hpp"
#include "aep/model.hpp"
#include "test_util.hpp"

namespace aep {
namespace {

using testing::random_tensor;

MultiExitModel make_model(std::string_view key, ImageShape in, std::vector<std::size_t> stages,
                          std::size_t classes, std::uint64_t seed) {
  Rng rng(seed ^ 0x5eed);
  return attach_exits(build_backbone(key, in, {.seed = seed}), stages, classes, rng);
}

std::vector<std::size_t> all_stages(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// Push BN running statistics away from their defaults so eval mode is not trivial.
void warm_up_norm(MultiExitModel& m, Rng& rng) {
  const Tensor x = random_tensor(m.input_shape().batch(4), rng, -1.0, 2.0);
  (void)m.forward_train(x);
}

TEST(Registry, BuiltinBackbones) {
  const auto keys = BackboneRegistry::keys();
  for (const char* k : {"micro-vgg-5", "micro-resnet-4", "micro-mobile-5", "micro-linear-2"}) {
    EXPECT_TRUE(BackboneRegistry::contains(k)) << k;
    EXPECT_FALSE(BackboneRegistry::description(k).empty());
  }
  EXPECT_EQ(build_backbone("micro-vgg-5", {3, 64, 64}).num_stages(), 5u);
  EXPECT_EQ(build_backbone("micro-resnet-4", {3, 32, 32}).num_stages(), 4u);
  EXPECT_EQ(build_backbone("micro-mobile-5", {3, 64, 64}).num_stages(), 5u);
  EXPECT_EQ(build_backbone("micro-linear-2", {3, 8, 8}).num_stages(), 2u);
  EXPECT_EQ(build_backbone("micro-vgg-5", {3, 64, 64}).spec().family, "micro-vgg");
}

TEST(Registry, Errors) {
  EXPECT_THROW((void)build_backbone("micro-vgg-5", {3, 0, 64}), std::invalid_argument);
  EXPECT_THROW((void)build_backbone("resnet50", {3, 64, 64}), NotFoundError);
  // five 2x pools do not fit 16 pixels
  EXPECT_THROW((void)build_backbone("micro-vgg-5", {3, 16, 16}), std::invalid_argument);
  EXPECT_THROW((void)build_backbone("micro-vgg-5", {3, 64, 64}, {.width_scale = 0.0}),
               std::invalid_argument);
}

TEST(Registry, WidthAndDepthScale) {
  const auto base = build_backbone("micro-resnet-4", {3, 32, 32});
  const auto wide = build_backbone("micro-resnet-4", {3, 32, 32}, {.width_scale = 2.0});
  const auto deep = build_backbone("micro-resnet-4", {3, 32, 32}, {.depth = 2});
  EXPECT_GT(wide.param_count(), base.param_count());
  EXPECT_GT(deep.param_count(), base.param_count());
  EXPECT_EQ(wide.stage_shapes().back().c, 128u);
}

TEST(Registry, SeededInitIsDeterministic) {
  auto a = make_model("micro-resnet-4", {3, 16, 16}, {0, 1, 2, 3}, 5, 7);
  auto b = make_model("micro-resnet-4", {3, 16, 16}, {0, 1, 2, 3}, 5, 7);
  auto c = make_model("micro-resnet-4", {3, 16, 16}, {0, 1, 2, 3}, 5, 8);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(pa[i].value->storage(), pb[i].value->storage());
    differs |= pa[i].value->storage() != pc[i].value->storage();
  }
  EXPECT_TRUE(differs);
}

TEST(Registry, ExternalAdapterCanRegister) {
  BackboneRegistry::add("test-tiny", "two convs", [](const ImageShape& in, const BackboneOptions&) {
    BackboneSpec s{"external", in, {}};
    s.stages.push_back({"a", {LayerSpec::conv(in.channels, 2, 3, 1, 1)}});
    s.stages.push_back({"b", {LayerSpec::conv(2, 3, 3, 2, 1)}});
    return s;
  });
  const auto bb = build_backbone("test-tiny", {1, 8, 8});
  EXPECT_EQ(bb.stage_shapes().back(), (Shape{1, 3, 4, 4}));
  BackboneRegistry::add("test-one-stage", "too shallow", [](const ImageShape& in,
                                                           const BackboneOptions&) {
    BackboneSpec s{"external", in, {}};
    s.stages.push_back({"a", {LayerSpec::conv(in.channels, 2, 3, 1, 1)}});
    return s;
  });
  EXPECT_THROW((void)build_backbone("test-one-stage", {1, 8, 8}), std::invalid_argument);
}

TEST(ExitHead, ParamCounts) {
  EXPECT_EQ(make_exit_head(512, 10).param_count(), 5130);
  EXPECT_EQ(make_exit_head(64, 200).param_count(), 13000);
  EXPECT_EQ(make_exit_head(1, 1).param_count(), 2);
  EXPECT_EQ(make_exit_head(512, 10).macs(), 5120);
  EXPECT_THROW((void)make_exit_head(0, 10), std::invalid_argument);
  EXPECT_THROW((void)make_exit_head(8, 0), std::invalid_argument);
}

TEST(ExitHead, OutputShapeIndependentOfSpatialSize) {
  Rng rng(1);
  ExitHead h = make_exit_head(4, 3);
  h.init_parameters(rng);
  for (std::size_t s : {1u, 2u, 7u}) {
    const Tensor y = h.forward(random_tensor({5, 4, s, s + 1}, rng));
    EXPECT_EQ(y.shape(), (Shape{5, 3, 1, 1}));
  }
}

TEST(ExitPlacement, Layouts) {
  EXPECT_EQ(exit_stage_indices(5, ExitLayout::kFull), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(exit_stage_indices(5, ExitLayout::kFour), (std::vector<std::size_t>{0, 1, 3, 4}));
  EXPECT_EQ(exit_stage_indices(4, ExitLayout::kFour), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(exit_stage_indices(7, ExitLayout::kFour), (std::vector<std::size_t>{0, 2, 4, 6}));
  EXPECT_EQ(exit_stage_indices(2, ExitLayout::kFour), (std::vector<std::size_t>{0, 1}));
  for (std::size_t s = 1; s <= 16; ++s) {
    const auto v = exit_stage_indices(s, ExitLayout::kFour);
    EXPECT_EQ(v.size(), std::min<std::size_t>(s, 4));
    EXPECT_EQ(v.back(), s - 1);
    for (std::size_t i = 1; i < v.size(); ++i) EXPECT_LT(v[i - 1], v[i]);
  }
  EXPECT_EQ(parse_exit_layout("full"), ExitLayout::kFull);
  EXPECT_EQ(parse_exit_layout("4"), ExitLayout::kFour);
  EXPECT_THROW((void)parse_exit_layout("3"), std::invalid_argument);
}

TEST(AttachExits, Variants) {
  const auto bb = build_backbone("micro-vgg-5", {3, 64, 64});
  const auto params_before = bb.param_count();
  Rng rng(2);
  const std::vector<std::size_t> full = {0, 1, 2, 3, 4};
  const std::vector<std::size_t> four = {1, 2, 3, 4};
  const auto m5 = attach_exits(bb, full, 10, rng);
  const auto m4 = attach_exits(bb, four, 10, rng);
  EXPECT_EQ(m5.num_exits(), 5u);
  EXPECT_EQ(m4.num_exits(), 4u);
  EXPECT_EQ(m4.backbone().param_count(), params_before);

  const auto rb = build_backbone("micro-resnet-4", {3, 32, 32});
  for (const std::vector<std::size_t>& bad :
       {std::vector<std::size_t>{0, 1, 2}, {0, 2, 1, 3}, {0, 1, 1, 3}, {3, 3}, {0, 4}, {}}) {
    EXPECT_THROW((void)attach_exits(rb, bad, 10, rng), std::invalid_argument);
  }
}

TEST(Forward, ShapesAndErrors) {
  Rng rng(3);
  auto m = make_model("micro-resnet-4", {3, 32, 32}, {0, 1, 2, 3}, 10, 1);
  const auto outs = m.forward_all_exits(random_tensor({64, 3, 32, 32}, rng));
  ASSERT_EQ(outs.size(), 4u);
  for (const auto& o : outs) EXPECT_EQ(o.shape(), (Shape{64, 10, 1, 1}));
  EXPECT_THROW((void)m.forward_all_exits(random_tensor({2, 1, 32, 32}, rng)),
               std::invalid_argument);
  EXPECT_THROW((void)m.forward_all_exits(random_tensor({2, 3, 16, 32}, rng)),
               std::invalid_argument);
}

TEST(Forward, InferenceIsDeterministic) {
  Rng rng(4);
  auto m = make_model("micro-mobile-5", {3, 32, 32}, {0, 1, 3, 4}, 10, 2);
  warm_up_norm(m, rng);
  const Tensor x = random_tensor({3, 3, 32, 32}, rng);
  const auto a = m.forward_all_exits(x);
  const auto b = m.forward_all_exits(x);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].storage(), b[i].storage());
}

// One exit at the last stage is exactly the plain backbone + classifier.
TEST(Forward, SingleExitEqualsPlainNetwork) {
  Rng rng(5);
  for (const char* key : {"micro-vgg-5", "micro-resnet-4", "micro-mobile-5"}) {
    const ImageShape in{3, 32, 32};
    const auto bb = build_backbone(key, in, {.seed = 3});
    const std::vector<std::size_t> last = {bb.num_stages() - 1};
    auto m = attach_exits(bb, last, 7, rng);
    warm_up_norm(m, rng);
    const Tensor x = random_tensor(in.batch(5), rng);
    Tensor h = x;
    for (std::size_t s = 0; s < m.backbone().num_stages(); ++s) h = m.backbone().stage(s).forward(h);
    const Tensor want = m.head(0).forward(h);
    const auto got = m.forward_all_exits(x);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].storage(), want.storage()) << key;
  }
}

TEST(ExitMaskTest, Basics) {
  const auto m = ExitMask::parse("0101");
  EXPECT_EQ(m.size(), 4u);
  EXPECT_EQ(m.count(), 2u);
  EXPECT_EQ(m.deepest(), 3u);
  EXPECT_EQ(m.indices(), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(m.bits(), 0b1010u);
  EXPECT_EQ(m.str(), "0101");
  EXPECT_EQ(ExitMask::from_bits(0b1010, 4), m);
  EXPECT_EQ(ExitMask::all(3).str(), "111");
  EXPECT_THROW((void)ExitMask::parse("0000"), std::invalid_argument);
  EXPECT_THROW((void)ExitMask::parse("01x1"), std::invalid_argument);
  EXPECT_THROW((void)ExitMask::from_bits(0b10000, 4), std::invalid_argument);
  EXPECT_THROW((void)ExitMask(std::vector<bool>{}), std::invalid_argument);
}

TEST(ExtractSubnetwork, Examples) {
  Rng rng(6);
  auto m = make_model("micro-vgg-5", {3, 32, 32}, {1, 2, 3, 4}, 10, 4);
  const Tensor x = random_tensor({6, 3, 32, 32}, rng);
  const auto full = m.forward_all_exits(x);

  const auto same = extract_subnetwork(m, ExitMask::all(4));
  EXPECT_EQ(count_params(same), count_params(m));
  const auto same_out = same.forward_all_exits(x);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(same_out[i].storage(), full[i].storage());

  const auto first = extract_subnetwork(m, ExitMask::parse("1000"));
  EXPECT_EQ(first.num_exits(), 1u);
  EXPECT_EQ(first.backbone().num_stages(), 2u);  // exit 1 sits after stage index 1
  EXPECT_EQ(first.exit_stages(), (std::vector<std::size_t>{1}));

  const auto two = extract_subnetwork(m, ExitMask::parse("0101"));
  ASSERT_EQ(two.num_exits(), 2u);
  const auto two_out = two.forward_all_exits(x);
  testing::expect_tensors_near(two_out[0], full[1], 1e-6);
  testing::expect_tensors_near(two_out[1], full[3], 1e-6);

  EXPECT_THROW((void)extract_subnetwork(m, ExitMask::parse("101")), std::invalid_argument);
}

// Every mask of every micro family: truncated logits equal the masked full ones.
TEST(ExtractSubnetwork, EquivalenceForAllMasks) {
  Rng rng(7);
  for (const char* key : {"micro-vgg-5", "micro-resnet-4", "micro-mobile-5"}) {
    const auto bb = build_backbone(key, {3, 32, 32}, {.seed = 9});
    auto m = attach_exits(bb, all_stages(bb.num_stages()), 4, rng);
    warm_up_norm(m, rng);
    const Tensor x = random_tensor({3, 3, 32, 32}, rng);
    const auto full = m.forward_all_exits(x);
    const std::size_t n = m.num_exits();
    for (std::uint64_t bits = 1; bits < (std::uint64_t{1} << n); ++bits) {
      const auto mask = ExitMask::from_bits(bits, n);
      const auto sub = extract_subnetwork(m, mask);
      EXPECT_EQ(sub.backbone().num_stages(), m.exit_stages()[mask.deepest()] + 1);
      const auto out = sub.forward_all_exits(x);
      const auto idx = mask.indices();
      ASSERT_EQ(out.size(), idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) {
        testing::expect_tensors_near(out[j], full[idx[j]], 1e-6);
      }
      // parameter additivity
      std::int64_t heads = 0;
      for (std::size_t j = 0; j < sub.num_exits(); ++j) heads += sub.head(j).param_count();
      EXPECT_EQ(count_params(sub), sub.backbone().param_count() + heads);
    }
  }
}

TEST(ExtractSubnetwork, FirstExitModelIsUsable) {
  Rng rng(8);
  auto m = make_model("micro-resnet-4", {3, 16, 16}, {0, 1, 2, 3}, 3, 5);
  auto sub = extract_subnetwork(m, ExitMask::parse("1000"));
  const Tensor x = random_tensor({2, 3, 16, 16}, rng);
  const auto logits = sub.forward_train(x);
  ASSERT_EQ(logits.size(), 1u);
  std::vector<Tensor> grads = {Tensor(logits[0].shape(), 0.1)};
  sub.backward(grads);
  EXPECT_GT(count_macs(sub, {3, 16, 16}), 0);
  EXPECT_LT(count_macs(sub, {3, 16, 16}), count_macs(m, {3, 16, 16}));
}

TEST(CopyState, BackboneByNameHeadsByStage) {
  auto a = make_model("micro-resnet-4", {3, 16, 16}, {3}, 4, 1);
  auto b = make_model("micro-resnet-4", {3, 16, 16}, {0, 1, 2, 3}, 4, 2);
  const std::size_t copied = copy_matching_state(a, b);
  // every backbone tensor plus the deepest head's weight and bias
  EXPECT_EQ(copied, a.parameters().size() + a.buffers().size());
  auto find = [](std::vector<ParamRef> ps, const std::string& name) {
    const auto it = std::find_if(ps.begin(), ps.end(), [&](const ParamRef& q) { return q.name == name; });
    return it == ps.end() ? std::vector<double>{} : it->value->storage();
  };
  for (const auto& p : a.parameters()) {
    if (!p.name.starts_with("stages.")) continue;
    EXPECT_EQ(find(b.parameters(), p.name), p.value->storage()) << p.name;
  }
  EXPECT_EQ(find(b.parameters(), "exits.3.weight"), find(a.parameters(), "exits.0.weight"));
  EXPECT_NE(find(b.parameters(), "exits.0.weight"), find(a.parameters(), "exits.0.weight"));
  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 16, 16}, rng);
  EXPECT_EQ(b.forward_all_exits(x)[3].storage(), a.forward_all_exits(x)[0].storage());
}

TEST(LoadParameters, FromSource) {
  auto m = make_model("micro-linear-2", {3, 4, 4}, {0, 1}, 2, 1);
  std::map<std::string, Tensor> store;
  for (const auto& p : m.parameters()) store[p.name] = Tensor(p.value->shape(), 0.25);
  ParameterSource src = [&](std::string_view name) -> const Tensor* {
    const auto it = store.find(std::string(name));
    return it == store.end() ? nullptr : &it->second;
  };
  EXPECT_EQ(load_parameters(m, src, false), store.size());
  for (const auto& p : m.parameters()) EXPECT_EQ((*p.value)[0], 0.25);
  store.erase(store.begin());
  EXPECT_THROW((void)load_parameters(m, src, true), NotFoundError);
}

TEST(Checkpoint, RoundTripReproducesOutputs) {
  testing::TempDir dir("ckpt");
  Rng rng(9);
  for (const char* key : {"micro-vgg-5", "micro-resnet-4", "micro-mobile-5"}) {
    const auto bb = build_backbone(key, {3, 32, 32}, {.seed = 2});
    auto m = attach_exits(bb, exit_stage_indices(bb.num_stages(), ExitLayout::kFour), 6, rng);
    warm_up_norm(m, rng);
    const nlohmann::json meta = {{"note", key}, {"weights", "mix"}};
    save_checkpoint(dir / "m.ckpt", m, meta);
    const auto ck = load_checkpoint(dir / "m.ckpt");
    EXPECT_EQ(ck.meta, meta);
    EXPECT_EQ(ck.model.backbone().spec(), m.backbone().spec());
    EXPECT_EQ(ck.model.exit_stages(), m.exit_stages());
    EXPECT_EQ(ck.model.num_classes(), 6u);
    const Tensor x = random_tensor({2, 3, 32, 32}, rng);
    const auto a = m.forward_all_exits(x);
    const auto b = ck.model.forward_all_exits(x);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].storage(), b[i].storage());
  }
}

TEST(Checkpoint, FirstStageSubnetworkRoundTrips) {
  testing::TempDir dir("ckpt");
  Rng rng(4);
  const auto bb = build_backbone("micro-resnet-4", {3, 8, 8});
  const auto m = attach_exits(bb, exit_stage_indices(4, ExitLayout::kFour), 2, rng);
  const auto first = extract_subnetwork(m, ExitMask::parse("1000"));
  ASSERT_EQ(first.backbone().num_stages(), 1u);
  save_checkpoint(dir / "first.ckpt", first, {});
  const auto ck = load_checkpoint(dir / "first.ckpt");
  const Tensor x = random_tensor({2, 3, 8, 8}, rng);
  EXPECT_EQ(ck.model.forward_all_exits(x)[0].storage(), first.forward_all_exits(x)[0].storage());
}

TEST(Checkpoint, Errors) {
  testing::TempDir dir("ckpt");
  EXPECT_THROW((void)load_checkpoint(dir / "none.ckpt"), NotFoundError);
  Archive a;
  a.meta["kind"] = "something-else";
  a.save(dir / "other.aep");
  EXPECT_THROW((void)load_checkpoint(dir / "other.aep"), FormatError);
}

TEST(SpecJson, RoundTrip) {
  const auto spec = BackboneRegistry::make_spec("micro-mobile-5", {3, 64, 64}, {});
  EXPECT_EQ(backbone_spec_from_json(to_json(spec)), spec);
}

}  // namespace
}  // namespace aep
