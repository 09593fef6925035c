// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Compiled with -mavx2 -mfma -ffp-contract=off. Only reached after a runtime
// CPU check, so nothing here may run at static-initialization time.
#include <immintrin.h>

#include <cmath>
#include <vector>

#include "aep/simd/kernels.hpp"

namespace aep::simd::avx2 {
namespace {

// C[4 x 8] += A[4 x k] * B[k x 8]; A addressed through (row, col) strides.
inline void micro_4x8(std::size_t k, const double* a, std::size_t a_rs, std::size_t a_cs,
                      const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * ldb;
    const __m256d b0 = _mm256_loadu_pd(brow);
    const __m256d b1 = _mm256_loadu_pd(brow + 4);
    const double* ap = a + p * a_cs;
    __m256d av = _mm256_broadcast_sd(ap);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(ap + a_rs);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(ap + 2 * a_rs);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(ap + 3 * a_rs);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  auto store = [](double* dst, __m256d lo, __m256d hi) {
    _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), lo));
    _mm256_storeu_pd(dst + 4, _mm256_add_pd(_mm256_loadu_pd(dst + 4), hi));
  };
  store(c, c00, c01);
  store(c + ldc, c10, c11);
  store(c + 2 * ldc, c20, c21);
  store(c + 3 * ldc, c30, c31);
}

// C[1 x n] += A[1 x k] * B[k x n] for an arbitrary column count.
inline void row_kernel(std::size_t n, std::size_t k, const double* a, std::size_t a_cs,
                       const double* b, std::size_t ldb, double* c) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p * a_cs), _mm256_loadu_pd(b + p * ldb + j),
                            acc);
    }
    _mm256_storeu_pd(c + j, _mm256_add_pd(_mm256_loadu_pd(c + j), acc));
  }
  for (; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += a[p * a_cs] * b[p * ldb + j];
    c[j] += acc;
  }
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

// c[0..4) += dot(a, b_j) for four rows b_j spaced ldb apart.
inline void dot_1x4(std::size_t k, const double* a, const double* b, std::size_t ldb,
                    double* c) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
  const double* b1 = b + ldb;
  const double* b2 = b + 2 * ldb;
  const double* b3 = b + 3 * ldb;
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    const __m256d av = _mm256_loadu_pd(a + p);
    s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p), s0);
    s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
    s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
    s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
  }
  double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
  for (; p < k; ++p) {
    r0 += a[p] * b[p];
    r1 += a[p] * b1[p];
    r2 += a[p] * b2[p];
    r3 += a[p] * b3[p];
  }
  c[0] += r0;
  c[1] += r1;
  c[2] += r2;
  c[3] += r3;
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0;
  }
  if (m == 0 || n == 0 || k == 0) return;

  if (trans_b && !trans_a) {
    // Rows of A and rows of B are both contiguous along k.
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = a + i * lda;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) dot_1x4(k, ai, b + j * ldb, ldb, c + i * ldc + j);
      for (; j < n; ++j) c[i * ldc + j] += dot(ai, b + j * ldb, k);
    }
    return;
  }

  std::vector<double> packed;
  if (trans_b) {
    // B is stored (n x k); repack as (k x n) so the inner loop runs along n.
    packed.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) packed[p * n + j] = b[j * ldb + p];
    b = packed.data();
    ldb = n;
  }
  const std::size_t a_rs = trans_a ? 1 : lda;
  const std::size_t a_cs = trans_a ? lda : 1;

  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      micro_4x8(k, a + i * a_rs, a_rs, a_cs, b + j, ldb, c + i * ldc + j, ldc);
    }
    if (j < n) {
      for (std::size_t r = 0; r < 4; ++r) {
        row_kernel(n - j, k, a + (i + r) * a_rs, a_cs, b + j, ldb, c + (i + r) * ldc + j);
      }
    }
  }
  for (; i < m; ++i) row_kernel(n, k, a + i * a_rs, a_cs, b, ldb, c + i * ldc);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_and_pd(v, _mm256_cmp_pd(v, zero, _CMP_GT_OQ)));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_and_pd(_mm256_loadu_pd(dy + i), mask));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

// Same operation order as the scalar reference and no FMA, so results match
// bit for bit.
void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,
                 const AdamStep& s) {
  const double step_size = s.lr / s.bias_correction1;
  const double bc2_sqrt = std::sqrt(s.bias_correction2);
  const __m256d b1 = _mm256_set1_pd(s.beta1), b1c = _mm256_set1_pd(1.0 - s.beta1);
  const __m256d b2 = _mm256_set1_pd(s.beta2), b2c = _mm256_set1_pd(1.0 - s.beta2);
  const __m256d vbc = _mm256_set1_pd(bc2_sqrt), veps = _mm256_set1_pd(s.eps);
  const __m256d vstep = _mm256_set1_pd(step_size);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi =
        _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(b1c, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(b2c, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d denom = _mm256_add_pd(_mm256_div_pd(_mm256_sqrt_pd(vi), vbc), veps);
    const __m256d upd = _mm256_mul_pd(vstep, _mm256_div_pd(mi, denom));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), upd));
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
    Backend::kAvx2, "avx2", &gemm, &dot, &axpy, &relu, &relu_backward, &adam_update,
};

}  // namespace

const KernelTable& table() { return kTable; }

}  // namespace aep::simd::avx2
