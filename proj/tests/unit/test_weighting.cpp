// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>

#include "aep/inference.hpp"
#include "aep/model.hpp"
#include "aep/weighting.hpp"
#include "test_util.hpp"

namespace aep {
namespace {

constexpr WeightMode kModes[] = {WeightMode::kDesc, WeightMode::kAsc, WeightMode::kMix,
                                 WeightMode::kUnif};

void expect_vec_near(const std::vector<double>& got, const std::vector<double>& want,
                     double tol = 1e-12) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "entry " << i;
}

TEST(LinearRamp, Examples) {
  expect_vec_near(linear_ramp(4, RampDirection::kAscending), {0.1, 0.2, 0.3, 0.4});
  expect_vec_near(linear_ramp(4, RampDirection::kUniform), {0.25, 0.25, 0.25, 0.25});
  expect_vec_near(linear_ramp(5, RampDirection::kDescending),
                  {5.0 / 15, 4.0 / 15, 3.0 / 15, 2.0 / 15, 1.0 / 15});
  expect_vec_near(linear_ramp(1, RampDirection::kAscending), {1.0});
}

TEST(LinearRamp, ZeroIsAnError) {
  EXPECT_THROW((void)linear_ramp(0, RampDirection::kAscending), std::invalid_argument);
  EXPECT_THROW((void)make_weights(WeightMode::kUnif, 0), std::invalid_argument);
}

TEST(LinearRamp, DescendingIsReversedAscending) {
  for (std::size_t n = 1; n <= 20; ++n) {
    auto asc = linear_ramp(n, RampDirection::kAscending);
    std::reverse(asc.begin(), asc.end());
    EXPECT_EQ(asc, linear_ramp(n, RampDirection::kDescending)) << n;
  }
}

TEST(MakeWeights, Examples) {
  const auto mix = make_weights(WeightMode::kMix, 4);
  expect_vec_near(mix.loss, {0.4, 0.3, 0.2, 0.1});
  expect_vec_near(mix.output, {0.1, 0.2, 0.3, 0.4});

  const auto unif = make_weights(WeightMode::kUnif, 3);
  expect_vec_near(unif.loss, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  expect_vec_near(unif.output, {1.0 / 3, 1.0 / 3, 1.0 / 3});

  const auto desc = make_weights(WeightMode::kDesc, 2);
  expect_vec_near(desc.loss, {2.0 / 3, 1.0 / 3});
  expect_vec_near(desc.output, {2.0 / 3, 1.0 / 3});

  const auto asc = make_weights(WeightMode::kAsc, 2);
  expect_vec_near(asc.loss, {1.0 / 3, 2.0 / 3});
  expect_vec_near(asc.output, {1.0 / 3, 2.0 / 3});
}

TEST(MakeWeights, InvariantsForAllModesAndSizes) {
  for (WeightMode mode : kModes) {
    for (std::size_t n = 1; n <= 32; ++n) {
      const auto w = make_weights(mode, n);
      ASSERT_EQ(w.n_exits(), n);
      ASSERT_EQ(w.output.size(), n);
      for (const auto* v : {&w.loss, &w.output}) {
        EXPECT_NEAR(std::accumulate(v->begin(), v->end(), 0.0), 1.0, 1e-9);
        EXPECT_GT(*std::min_element(v->begin(), v->end()), 0.0);
      }
      if (n < 2) continue;
      const bool loss_desc = mode == WeightMode::kDesc || mode == WeightMode::kMix;
      const bool out_desc = mode == WeightMode::kDesc;
      for (std::size_t i = 1; i < n; ++i) {
        if (mode == WeightMode::kUnif) {
          EXPECT_EQ(w.loss[i], w.loss[0]);
          EXPECT_EQ(w.output[i], w.output[0]);
          continue;
        }
        if (loss_desc) {
          EXPECT_LT(w.loss[i], w.loss[i - 1]);
        } else {
          EXPECT_GT(w.loss[i], w.loss[i - 1]);
        }
        if (out_desc) {
          EXPECT_LT(w.output[i], w.output[i - 1]);
        } else {
          EXPECT_GT(w.output[i], w.output[i - 1]);
        }
      }
    }
  }
}

TEST(WeightModeNames, RoundTrip) {
  for (WeightMode mode : kModes) EXPECT_EQ(parse_weight_mode(weight_mode_name(mode)), mode);
  EXPECT_EQ(weight_mode_name(WeightMode::kMix), "mix");
  EXPECT_THROW((void)parse_weight_mode("linear"), std::invalid_argument);
  EXPECT_THROW((void)parse_weight_mode(""), std::invalid_argument);
}

TEST(RestrictWeights, Examples) {
  ExitWeights w{{0.4, 0.3, 0.2, 0.1}, {0.1, 0.2, 0.3, 0.4}};
  const auto mask = ExitMask::parse("0101");
  const auto raw = restrict_weights(w, mask, false);
  expect_vec_near(raw.output, {0.2, 0.4});
  expect_vec_near(raw.loss, {0.3, 0.1});
  const auto norm = restrict_weights(w, mask, true);
  expect_vec_near(norm.output, {1.0 / 3, 2.0 / 3});
  expect_vec_near(norm.loss, {0.75, 0.25});

  ExitWeights single{{1.0}, {1.0}};
  expect_vec_near(restrict_weights(single, ExitMask::parse("1"), true).output, {1.0});
}

TEST(RestrictWeights, DefaultKeepsTrainingValues) {
  const auto w = make_weights(WeightMode::kAsc, 3);
  const auto r = restrict_weights(w, ExitMask::parse("101"));
  EXPECT_EQ(r.output, (std::vector<double>{w.output[0], w.output[2]}));
}

TEST(RestrictWeights, Errors) {
  const auto w = make_weights(WeightMode::kUnif, 4);
  EXPECT_THROW((void)ExitMask::parse("0000"), std::invalid_argument);
  EXPECT_THROW((void)restrict_weights(w, ExitMask::parse("101")), std::invalid_argument);
}

// Renormalizing the restricted weights never changes a prediction.
TEST(RestrictWeights, RenormalizationIsPredictionNeutral) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(5);
    const std::size_t b = 1 + rng.below(8);
    const std::size_t c = 2 + rng.below(5);
    const auto w = make_weights(kModes[rng.below(4)], n);
    std::vector<Tensor> outs;
    for (std::size_t i = 0; i < n; ++i) outs.push_back(testing::random_tensor({b, c, 1, 1}, rng));
    for (const auto& mask_bits : {std::uint64_t{1}, (std::uint64_t{1} << n) - 1,
                                  1 + rng.below((std::uint64_t{1} << n) - 1)}) {
      const auto mask = ExitMask::from_bits(mask_bits, n);
      std::vector<Tensor> kept;
      for (std::size_t i : mask.indices()) kept.push_back(outs[i]);
      const auto raw = restrict_weights(w, mask, false);
      const auto norm = restrict_weights(w, mask, true);
      EXPECT_EQ(predict(kept, raw.output), predict(kept, norm.output));
    }
  }
}

}  // namespace
}  // namespace aep
