// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "aep/layers.hpp"
#include "aep/simd/kernels.hpp"
#include "test_util.hpp"

namespace aep {
namespace {

using testing::random_tensor;

std::vector<ParamRef> params_of(Sequential& s) {
  std::vector<ParamRef> p;
  s.collect_params("l", p);
  return p;
}

void randomize(Sequential& s, Rng& rng) {
  for (auto& p : params_of(s)) {
    for (double& v : p.value->values()) v = rng.uniform(-0.8, 0.8);
    // keep BN scales away from zero
    if (p.name.ends_with(".gamma")) {
      for (double& v : p.value->values()) v = 0.5 + std::abs(v);
    }
  }
}

// Direct seven-loop convolution.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor* b, const LayerSpec& s) {
  const Shape& in = x.shape();
  const std::size_t oh = (in.h + 2 * s.padding - s.kernel) / s.stride + 1;
  const std::size_t ow = (in.w + 2 * s.padding - s.kernel) / s.stride + 1;
  const std::size_t cin_g = s.in_channels / s.groups;
  const std::size_t cout_g = s.out_channels / s.groups;
  Tensor y(Shape{in.n, s.out_channels, oh, ow});
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t co = 0; co < s.out_channels; ++co) {
      const std::size_t g = co / cout_g;
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = b != nullptr ? (*b)[co] : 0.0;
          for (std::size_t ci = 0; ci < cin_g; ++ci) {
            for (std::size_t ki = 0; ki < s.kernel; ++ki) {
              for (std::size_t kj = 0; kj < s.kernel; ++kj) {
                const long r = static_cast<long>(i * s.stride + ki) - static_cast<long>(s.padding);
                const long c = static_cast<long>(j * s.stride + kj) - static_cast<long>(s.padding);
                if (r < 0 || c < 0 || r >= static_cast<long>(in.h) ||
                    c >= static_cast<long>(in.w)) {
                  continue;
                }
                acc += x.at(n, g * cin_g + ci, r, c) * w.at(co, ci, ki, kj);
              }
            }
          }
          y.at(n, co, i, j) = acc;
        }
      }
    }
  }
  return y;
}

struct ConvCase {
  std::size_t cin, cout, k, stride, pad, groups, h, w;
  bool bias;
};

const ConvCase kConvCases[] = {
    {3, 8, 3, 1, 1, 1, 7, 6, true},  {4, 6, 3, 2, 1, 1, 9, 9, false},
    {2, 3, 1, 1, 0, 1, 5, 4, true},  {6, 6, 3, 1, 1, 6, 6, 5, false},
    {6, 6, 3, 2, 1, 6, 8, 7, false}, {4, 8, 3, 1, 0, 2, 6, 6, true},
    {3, 5, 5, 1, 2, 1, 5, 5, true},  {2, 4, 3, 3, 0, 1, 10, 10, true},
    {4, 4, 1, 2, 0, 1, 7, 7, false},
};

TEST(Conv, MatchesDirectOracleOnEveryBackend) {
  const simd::Backend backends[] = {simd::Backend::kScalar, simd::detect_best()};
  for (auto backend : backends) {
    ASSERT_TRUE(simd::set_backend(backend));
    Rng rng(1);
    for (const auto& c : kConvCases) {
      const auto spec = LayerSpec::conv(c.cin, c.cout, c.k, c.stride, c.pad, c.bias, c.groups);
      Sequential seq({spec});
      randomize(seq, rng);
      auto p = params_of(seq);
      const Tensor x = random_tensor({3, c.cin, c.h, c.w}, rng);
      const Tensor want = conv_oracle(x, *p[0].value, c.bias ? p[1].value : nullptr, spec);
      testing::expect_tensors_near(seq.forward(x), want, 1e-12);
      testing::expect_tensors_near(seq.forward_train(x), want, 1e-12);
    }
  }
  simd::set_backend(simd::detect_best());
}

TEST(Conv, ShapeInferenceAndErrors) {
  Sequential s({LayerSpec::conv(3, 16, 3, 2, 1)});
  EXPECT_EQ(s.output_shape({1, 3, 32, 32}), (Shape{1, 16, 16, 16}));
  EXPECT_EQ(s.output_shape({1, 3, 33, 31}), (Shape{1, 16, 17, 16}));
  EXPECT_THROW((void)s.output_shape({1, 4, 32, 32}), std::invalid_argument);
  Sequential big({LayerSpec::conv(3, 4, 5, 1, 0)});
  EXPECT_THROW((void)big.output_shape({1, 3, 4, 4}), std::invalid_argument);
  EXPECT_THROW(Sequential({LayerSpec::conv(3, 4, 3, 1, 1, true, 2)}), std::invalid_argument);
}

TEST(Conv, ParamCountAndMacs) {
  std::vector<LayerCost> costs;
  Sequential s({LayerSpec::conv(3, 16, 3, 1, 1, true)});
  EXPECT_EQ(s.param_count(), 448);
  s.cost_breakdown("c", {1, 3, 32, 32}, costs);
  ASSERT_EQ(costs.size(), 1u);
  EXPECT_EQ(costs[0].macs, 442368);
  // depthwise: one input channel per group
  costs.clear();
  Sequential dw({LayerSpec::conv(8, 8, 3, 1, 1, false, 8)});
  EXPECT_EQ(dw.param_count(), 72);
  dw.cost_breakdown("d", {1, 8, 4, 4}, costs);
  EXPECT_EQ(costs[0].macs, 9 * 8 * 16);
}

// PyTorch BatchNorm2d semantics: biased variance to normalize in training,
// unbiased variance into the running estimate, momentum 0.1, eps 1e-5.
TEST(BatchNorm, TrainAndEvalMatchOracle) {
  Rng rng(2);
  Sequential bn({LayerSpec::batch_norm(3)});
  randomize(bn, rng);
  auto p = params_of(bn);
  const Tensor& gamma = *p[0].value;
  const Tensor& beta = *p[1].value;
  const Tensor x = random_tensor({4, 3, 2, 3}, rng, -3.0, 5.0);
  const Tensor y = bn.forward_train(x);
  std::vector<BufferRef> bufs;
  bn.collect_buffers("l", bufs);
  ASSERT_EQ(bufs.size(), 2u);
  const double m = 4.0 * 6.0;
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 6; ++i) mean += x.at(n, c, i / 3, i % 3);
    mean /= m;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 6; ++i) sq += std::pow(x.at(n, c, i / 3, i % 3) - mean, 2);
    const double var = sq / m;
    for (std::size_t n = 0; n < 4; ++n) {
      for (std::size_t i = 0; i < 6; ++i) {
        const double want =
            gamma[c] * (x.at(n, c, i / 3, i % 3) - mean) / std::sqrt(var + 1e-5) + beta[c];
        EXPECT_NEAR(y.at(n, c, i / 3, i % 3), want, 1e-12);
      }
    }
    EXPECT_NEAR((*bufs[0].value)[c], 0.1 * mean, 1e-12);
    EXPECT_NEAR((*bufs[1].value)[c], 0.9 + 0.1 * sq / (m - 1.0), 1e-12);
  }
  // eval uses the running estimates
  const Tensor e = bn.forward(x);
  for (std::size_t c = 0; c < 3; ++c) {
    const double rm = (*bufs[0].value)[c];
    const double rv = (*bufs[1].value)[c];
    EXPECT_NEAR(e.at(1, c, 1, 2), gamma[c] * (x.at(1, c, 1, 2) - rm) / std::sqrt(rv + 1e-5) + beta[c],
                1e-12);
  }
}

TEST(MaxPool, ForwardAndRouting) {
  Sequential pool({LayerSpec::max_pool(2)});
  Tensor x(Shape{1, 1, 4, 5},
           std::vector<double>{1, 2, 5, 0, 9,  //
                               3, 4, 1, 1, 9,  //
                               0, 0, 7, 8, 9,  //
                               0, 1, 6, 6, 9});
  EXPECT_EQ(pool.output_shape(x.shape()), (Shape{1, 1, 2, 2}));
  const Tensor y = pool.forward_train(x);
  EXPECT_EQ(y.storage(), (std::vector<double>{4, 5, 1, 8}));
  const Tensor dx = pool.backward(Tensor(y.shape(), std::vector<double>{1, 2, 3, 4}));
  double total = 0.0;
  for (double v : dx.values()) total += v;
  EXPECT_EQ(total, 10.0);
  EXPECT_EQ(dx.at(0, 0, 1, 1), 1.0);
  EXPECT_EQ(dx.at(0, 0, 0, 2), 2.0);
  EXPECT_EQ(dx.at(0, 0, 2, 3), 4.0);
  EXPECT_THROW((void)pool.output_shape({1, 1, 1, 4}), std::invalid_argument);
}

TEST(Relu, ForwardBackward) {
  Sequential r({LayerSpec::relu()});
  Tensor x(Shape{1, 4, 1, 1}, std::vector<double>{-1, 0, 2, -3});
  EXPECT_EQ(r.forward_train(x).storage(), (std::vector<double>{0, 0, 2, 0}));
  EXPECT_EQ(r.backward(Tensor(x.shape(), 1.0)).storage(), (std::vector<double>{0, 0, 1, 0}));
}

TEST(Residual, IdentityAndProjection) {
  Rng rng(4);
  // body = relu, identity shortcut, no relu after: y = relu(x) + x
  Sequential id({LayerSpec::residual({LayerSpec::relu()}, {}, false)});
  const Tensor x = random_tensor({2, 3, 2, 2}, rng);
  const Tensor y = id.forward(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], std::max(x[i], 0.0) + x[i]);

  Sequential proj({LayerSpec::residual({LayerSpec::conv(3, 4, 3, 2, 1, false)},
                                       {LayerSpec::conv(3, 4, 1, 2, 0, false)}, true)});
  EXPECT_EQ(proj.output_shape({1, 3, 8, 8}), (Shape{1, 4, 4, 4}));
  const Sequential mismatch({LayerSpec::residual({LayerSpec::conv(3, 4, 3, 1, 1)}, {}, true)});
  EXPECT_THROW((void)mismatch.output_shape({1, 3, 8, 8}), std::invalid_argument);
}

TEST(Sequential, CopyIsDeep) {
  Rng rng(6);
  Sequential a({LayerSpec::conv(2, 2, 3, 1, 1), LayerSpec::batch_norm(2)});
  randomize(a, rng);
  Sequential b = a;
  (*params_of(b)[0].value)[0] += 1.0;
  EXPECT_NE((*params_of(a)[0].value)[0], (*params_of(b)[0].value)[0]);
  EXPECT_EQ(a.specs(), b.specs());
}

// Central differences of L = sum(forward_train(x) * r) against backward(r).
void gradient_check(Sequential& seq, Shape in, Rng& rng) {
  randomize(seq, rng);
  Tensor x = random_tensor(in, rng);
  const Shape out = seq.output_shape(in);
  const Tensor r = random_tensor(out, rng);
  auto loss = [&](const Tensor& input) {
    const Tensor y = seq.forward_train(input);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
    return s;
  };
  auto params = params_of(seq);
  for (auto& p : params) p.grad->fill(0.0);
  (void)seq.forward_train(x);
  const Tensor dx = seq.backward(r);

  const double h = 1e-6;
  std::size_t checked = 0, bad = 0;
  auto check = [&](double& slot, double analytic, const std::string& what) {
    const double keep = slot;
    slot = keep + h;
    const double up = loss(x);
    slot = keep - h;
    const double down = loss(x);
    slot = keep;
    const double numeric = (up - down) / (2 * h);
    ++checked;
    if (!testing::close_rel(numeric, analytic, 1e-5)) {
      ++bad;
      ADD_FAILURE() << what << ": numeric " << numeric << " analytic " << analytic;
    }
  };
  for (std::size_t i = 0; i < x.size(); i += 1 + x.size() / 40) check(x[i], dx[i], "input");
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.value->size(); i += 1 + p.value->size() / 20) {
      check((*p.value)[i], (*p.grad)[i], p.name);
    }
  }
  EXPECT_GT(checked, 0u);
  EXPECT_EQ(bad, 0u);
}

TEST(GradientCheck, Conv) {
  Rng rng(10);
  for (const auto& c : kConvCases) {
    Sequential s({LayerSpec::conv(c.cin, c.cout, c.k, c.stride, c.pad, c.bias, c.groups)});
    gradient_check(s, {2, c.cin, c.h, c.w}, rng);
  }
}

TEST(GradientCheck, BatchNorm) {
  Rng rng(11);
  Sequential s({LayerSpec::batch_norm(3)});
  gradient_check(s, {3, 3, 2, 2}, rng);
}

TEST(GradientCheck, MaxPool) {
  Rng rng(12);
  Sequential s({LayerSpec::max_pool(2)});
  gradient_check(s, {2, 2, 4, 5}, rng);
}

TEST(GradientCheck, ResidualBlocks) {
  Rng rng(13);
  Sequential basic({LayerSpec::residual(
      {LayerSpec::conv(2, 4, 3, 2, 1, false), LayerSpec::batch_norm(4), LayerSpec::relu(),
       LayerSpec::conv(4, 4, 3, 1, 1, false), LayerSpec::batch_norm(4)},
      {LayerSpec::conv(2, 4, 1, 2, 0, false), LayerSpec::batch_norm(4)}, true)});
  gradient_check(basic, {3, 2, 6, 6}, rng);
  Sequential inverted({LayerSpec::residual(
      {LayerSpec::conv(3, 6, 1, 1, 0, false), LayerSpec::batch_norm(6), LayerSpec::relu(),
       LayerSpec::conv(6, 6, 3, 1, 1, false, 6), LayerSpec::batch_norm(6),
       LayerSpec::conv(6, 3, 1, 1, 0, false), LayerSpec::batch_norm(3)},
      {}, false)});
  gradient_check(inverted, {2, 3, 4, 4}, rng);
}

TEST(LayerSpec, KindNames) {
  for (auto k : {LayerKind::kConv, LayerKind::kBatchNorm, LayerKind::kRelu, LayerKind::kMaxPool,
                 LayerKind::kResidual}) {
    EXPECT_EQ(parse_layer_kind(layer_kind_name(k)), k);
  }
  EXPECT_THROW((void)parse_layer_kind("dropout"), std::invalid_argument);
}

}  // namespace
}  // namespace aep
