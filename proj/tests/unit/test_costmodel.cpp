// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "aep/costmodel.hpp"
#include "aep/model.hpp"
#include "test_util.hpp"

namespace aep {
namespace {

MultiExitModel model_with(std::string_view key, ImageShape in, std::vector<std::size_t> stages,
                          std::size_t classes) {
  Rng rng(1);
  return attach_exits(build_backbone(key, in), stages, classes, rng);
}

// micro-vgg-5 at (3, 64, 64), 10 classes, one exit per stage. Per conv:
// params k*k*cin*cout + cout, MACs k*k*cin*cout*H*W at the conv's output size.
struct VggFixture {
  std::int64_t stage_params[5] = {
      9 * 3 * 8 + 8,                            // 64x64
      9 * 8 * 16 + 16,                          // 32x32
      (9 * 16 * 24 + 24) + (9 * 24 * 24 + 24),  // 16x16
      (9 * 24 * 32 + 32) + (9 * 32 * 32 + 32),  // 8x8
      (9 * 32 * 32 + 32) + (9 * 32 * 32 + 32),  // 4x4
  };
  std::int64_t stage_macs[5] = {
      9 * 3 * 8 * 64 * 64,
      9 * 8 * 16 * 32 * 32,
      9 * 16 * 24 * 16 * 16 + 9 * 24 * 24 * 16 * 16,
      9 * 24 * 32 * 8 * 8 + 9 * 32 * 32 * 8 * 8,
      9 * 32 * 32 * 4 * 4 + 9 * 32 * 32 * 4 * 4,
  };
  std::int64_t head_params[5] = {8 * 10 + 10, 16 * 10 + 10, 24 * 10 + 10, 32 * 10 + 10,
                                 32 * 10 + 10};
  std::int64_t head_macs[5] = {80, 160, 240, 320, 320};
};

TEST(CostModel, UnitCases) {
  Sequential conv({LayerSpec::conv(3, 16, 3, 1, 1, true)});
  EXPECT_EQ(conv.param_count(), 448);
  std::vector<LayerCost> c;
  conv.cost_breakdown("c", {1, 3, 32, 32}, c);
  EXPECT_EQ(c.at(0).macs, 442368);
  const ExitHead dense = make_exit_head(512, 10);
  EXPECT_EQ(dense.param_count(), 5130);
  EXPECT_EQ(dense.macs(), 5120);
}

TEST(CostModel, MicroVggFixture) {
  const VggFixture f;
  const auto m = model_with("micro-vgg-5", {3, 64, 64}, {0, 1, 2, 3, 4}, 10);
  const std::int64_t backbone_params =
      std::accumulate(std::begin(f.stage_params), std::end(f.stage_params), std::int64_t{0});
  const std::int64_t backbone_macs =
      std::accumulate(std::begin(f.stage_macs), std::end(f.stage_macs), std::int64_t{0});
  EXPECT_EQ(backbone_params, 44768);
  EXPECT_EQ(backbone_macs, 5603328);
  const std::int64_t heads_p =
      std::accumulate(std::begin(f.head_params), std::end(f.head_params), std::int64_t{0});
  const std::int64_t heads_m =
      std::accumulate(std::begin(f.head_macs), std::end(f.head_macs), std::int64_t{0});
  EXPECT_EQ(m.backbone().param_count(), backbone_params);
  EXPECT_EQ(count_params(m), backbone_params + heads_p);
  EXPECT_EQ(count_macs(m, {3, 64, 64}), backbone_macs + heads_m);

  const auto table = exit_cost_table(m, {3, 64, 64});
  for (std::size_t s = 0; s < 5; ++s) {
    EXPECT_EQ(table.stage_params[s], f.stage_params[s]) << s;
    EXPECT_EQ(table.stage_macs[s], f.stage_macs[s]) << s;
    EXPECT_EQ(table.head_params[s], f.head_params[s]) << s;
    EXPECT_EQ(table.head_macs[s], f.head_macs[s]) << s;
  }
}

TEST(CostModel, BreakdownIsAdditive) {
  for (const char* key : {"micro-vgg-5", "micro-resnet-4", "micro-mobile-5"}) {
    const auto bb = build_backbone(key, {3, 32, 32});
    Rng rng(2);
    const auto m = attach_exits(bb, exit_stage_indices(bb.num_stages(), ExitLayout::kFull), 7, rng);
    const auto r = cost_report(m, {3, 32, 32});
    std::int64_t p = 0, macs = 0;
    for (const auto& e : r.breakdown) {
      EXPECT_GE(e.params, 0);
      EXPECT_GE(e.macs, 0);
      if (e.kind == "batchnorm" || e.kind == "relu" || e.kind == "maxpool") {
        EXPECT_EQ(e.macs, 0) << e.name;
      }
      p += e.params;
      macs += e.macs;
    }
    EXPECT_EQ(p, r.params);
    EXPECT_EQ(macs, r.macs);
    EXPECT_EQ(r.params, count_params(m));
    EXPECT_EQ(r.macs, count_macs(m, {3, 32, 32}));

    const std::string csv = breakdown_table(r);
    EXPECT_TRUE(csv.starts_with("name,kind,params,macs\n"));
    const auto lines = std::count(csv.begin(), csv.end(), '\n');
    EXPECT_EQ(static_cast<std::size_t>(lines), r.breakdown.size() + 1);
    EXPECT_NE(breakdown_table(r, '\t').find("name\tkind"), std::string::npos);
  }
}

TEST(CostModel, ExitTableMatchesExtractedSubnetworks) {
  for (const char* key : {"micro-vgg-5", "micro-resnet-4", "micro-mobile-5"}) {
    const auto bb = build_backbone(key, {3, 32, 32});
    Rng rng(3);
    const auto m = attach_exits(bb, exit_stage_indices(bb.num_stages(), ExitLayout::kFour), 5, rng);
    const auto table = exit_cost_table(m, {3, 32, 32});
    const std::size_t n = m.num_exits();
    for (std::uint64_t bits = 1; bits < (1u << n); ++bits) {
      const auto mask = ExitMask::from_bits(bits, n);
      const auto sub = extract_subnetwork(m, mask);
      EXPECT_EQ(table.params(mask), count_params(sub));
      EXPECT_EQ(table.macs(mask), count_macs(sub, {3, 32, 32}));
      // truncation never grows the model; equality only for the full mask
      EXPECT_LE(count_params(sub), count_params(m));
      EXPECT_EQ(count_params(sub) == count_params(m), mask.count() == n);
    }
  }
}

// Holding the head set to "deepest only", cost grows with depth.
TEST(CostModel, MonotoneInDeepestExit) {
  for (const char* key : {"micro-vgg-5", "micro-resnet-4", "micro-mobile-5"}) {
    const auto bb = build_backbone(key, {3, 32, 32});
    Rng rng(4);
    const auto m = attach_exits(bb, exit_stage_indices(bb.num_stages(), ExitLayout::kFull), 10, rng);
    const auto table = exit_cost_table(m, {3, 32, 32});
    const std::size_t n = m.num_exits();
    std::int64_t prev_p = 0, prev_m = 0;
    for (std::size_t d = 0; d < n; ++d) {
      const auto mask = ExitMask::from_bits(std::uint64_t{1} << d, n);
      EXPECT_GE(table.params(mask), prev_p);
      EXPECT_GE(table.macs(mask), prev_m);
      prev_p = table.params(mask);
      prev_m = table.macs(mask);
    }
  }
}

TEST(CostModel, ShapeErrors) {
  const auto m = model_with("micro-vgg-5", {3, 64, 64}, {0, 1, 2, 3, 4}, 10);
  EXPECT_THROW((void)count_macs(m, {1, 64, 64}), std::invalid_argument);
  EXPECT_THROW((void)count_macs(m, {3, 8, 8}), std::invalid_argument);
}

TEST(PercentChange, Examples) {
  EXPECT_DOUBLE_EQ(percent_change(85, 80), 6.25);
  EXPECT_DOUBLE_EQ(percent_change(59, 100), -41.0);
  EXPECT_EQ(percent_change(3.7, 3.7), 0.0);
  EXPECT_THROW((void)percent_change(1.0, 0.0), std::invalid_argument);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(0.1, 100), b = rng.uniform(0.1, 100);
    // swapping the roles rescales by the ratio of the baselines
    EXPECT_NEAR(percent_change(a, b), -percent_change(b, a) * a / b,
                1e-9 * std::max(1.0, std::abs(percent_change(a, b))));
  }
}

TEST(Latency, SummaryStatistics) {
  const auto one = summarize_latency({2.5});
  EXPECT_EQ(one.median_ms, 2.5);
  EXPECT_EQ(one.min_ms, 2.5);
  EXPECT_EQ(one.iqr_ms(), 0.0);
  const auto s = summarize_latency({5, 1, 4, 2, 3});
  EXPECT_EQ(s.median_ms, 3.0);
  EXPECT_EQ(s.q1_ms, 2.0);
  EXPECT_EQ(s.q3_ms, 4.0);
  EXPECT_EQ(s.min_ms, 1.0);
  EXPECT_EQ(s.max_ms, 5.0);
  const auto even = summarize_latency({1, 2, 3, 4});
  EXPECT_EQ(even.median_ms, 2.5);
  EXPECT_EQ(even.q1_ms, 1.75);
  EXPECT_THROW((void)summarize_latency({}), std::invalid_argument);
}

TEST(Latency, Measurement) {
  const auto m = model_with("micro-resnet-4", {3, 16, 16}, {0, 1, 2, 3}, 10);
  const auto one = measure_latency(m, {3, 16, 16}, {.warmup = 1, .reps = 1, .batch = 1});
  ASSERT_EQ(one.samples_ms.size(), 1u);
  EXPECT_EQ(one.median_ms, one.samples_ms[0]);
  const auto s = measure_latency(m, {3, 16, 16}, {.warmup = 2, .reps = 15, .batch = 2});
  EXPECT_EQ(s.reps, 15u);
  EXPECT_EQ(s.batch, 2u);
  EXPECT_EQ(s.warmup, 2u);
  EXPECT_GT(s.median_ms, 0.0);
  EXPECT_LE(s.min_ms, s.median_ms);
  EXPECT_LE(s.median_ms, s.max_ms);
  EXPECT_THROW((void)measure_latency(m, {3, 16, 16}, {.warmup = 0, .reps = 0, .batch = 1}),
               std::invalid_argument);
}

}  // namespace
}  // namespace aep
