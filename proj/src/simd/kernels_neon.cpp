// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
//
// AArch64 variant. Built only on AArch64 targets, where NEON is mandatory.
#include <arm_neon.h>

#include <cmath>
#include <vector>

#include "aep/simd/kernels.hpp"

namespace aep::simd::neon {
namespace {

// C[1 x n] += A[1 x k] * B[k x n]
inline void row_kernel(std::size_t n, std::size_t k, const double* a, std::size_t a_cs,
                       const double* b, std::size_t ldb, double* c) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const float64x2_t av = vdupq_n_f64(a[p * a_cs]);
      acc0 = vfmaq_f64(acc0, av, vld1q_f64(b + p * ldb + j));
      acc1 = vfmaq_f64(acc1, av, vld1q_f64(b + p * ldb + j + 2));
    }
    vst1q_f64(c + j, vaddq_f64(vld1q_f64(c + j), acc0));
    vst1q_f64(c + j + 2, vaddq_f64(vld1q_f64(c + j + 2), acc1));
  }
  for (; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += a[p * a_cs] * b[p * ldb + j];
    c[j] += acc;
  }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0;
  }
  if (m == 0 || n == 0 || k == 0) return;
  std::vector<double> packed;
  if (trans_b) {
    packed.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) packed[p * n + j] = b[j * ldb + p];
    b = packed.data();
    ldb = n;
  }
  const std::size_t a_rs = trans_a ? 1 : lda;
  const std::size_t a_cs = trans_a ? lda : 1;
  for (std::size_t i = 0; i < m; ++i) row_kernel(n, k, a + i * a_rs, a_cs, b, ldb, c + i * ldc);
}

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(x + i);
    const uint64x2_t mask = vcgtq_f64(v, zero);
    vst1q_f64(y + i, vreinterpretq_f64_u64(vandq_u64(vreinterpretq_u64_f64(v), mask)));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
    vst1q_f64(dx + i, vreinterpretq_f64_u64(
                          vandq_u64(vreinterpretq_u64_f64(vld1q_f64(dy + i)), mask)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamStep& s) {
  const double step_size = s.lr / s.bias_correction1;
  const double bc2_sqrt = std::sqrt(s.bias_correction2);
  const float64x2_t b1 = vdupq_n_f64(s.beta1), b1c = vdupq_n_f64(1.0 - s.beta1);
  const float64x2_t b2 = vdupq_n_f64(s.beta2), b2c = vdupq_n_f64(1.0 - s.beta2);
  const float64x2_t vbc = vdupq_n_f64(bc2_sqrt), veps = vdupq_n_f64(s.eps);
  const float64x2_t vstep = vdupq_n_f64(step_size);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t mi = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(b1c, g));
    const float64x2_t vi =
        vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(b2c, vmulq_f64(g, g)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t denom = vaddq_f64(vdivq_f64(vsqrtq_f64(vi), vbc), veps);
    vst1q_f64(param + i,
              vsubq_f64(vld1q_f64(param + i), vmulq_f64(vstep, vdivq_f64(mi, denom))));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * (g * g);
    const double denom = std::sqrt(v[i]) / bc2_sqrt + s.eps;
    param[i] -= step_size * (m[i] / denom);
  }
}

constexpr KernelTable kTable{
    Backend::kNeon, "neon", &gemm, &dot, &axpy, &relu, &relu_backward, &adam_update,
};

}  // namespace

const KernelTable& table() { return kTable; }

}  // namespace aep::simd::neon
