// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Data-parallel inner loops used by the layers and the optimizer.
//
// Every kernel has a scalar reference implementation. Vector variants (AVX2+FMA
// on x86-64, NEON on AArch64) are compiled into separate translation units and
// selected once at startup from CPU feature detection. AEP_SIMD=scalar|avx2|neon
// in the environment overrides the choice; tests switch explicitly through
// set_backend().

#include <cstddef>
#include <span>
#include <string_view>

namespace aep::simd {

enum class Backend { kScalar, kAvx2, kNeon };

/// Hyperparameters for one Adam step, with the bias corrections precomputed.
struct AdamStep {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double bias_correction1 = 1.0;  // 1 - beta1^t
  double bias_correction2 = 1.0;  // 1 - beta2^t
};

struct KernelTable {
  Backend backend;
  std::string_view name;

  // C[m, n] = op(A)[m, k] * op(B)[k, n], or C += ... when accumulate is set.
  // Row-major with leading dimensions; op(X) = X^T when the trans flag is set.
  void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
               std::size_t ldc, bool accumulate);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*relu)(const double* x, double* y, std::size_t n);
  // dx = x > 0 ? dy : 0
  void (*relu_backward)(const double* x, const double* dy, double* dx, std::size_t n);
  // PyTorch Adam (no weight decay, no amsgrad).
  void (*adam_update)(double* param, const double* grad, double* m, double* v, std::size_t n,
                      const AdamStep& step);
};

const KernelTable& scalar_kernels();
/// nullptr when the variant is not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

/// Currently selected table.
const KernelTable& kernels();
/// Best variant supported by this CPU.
Backend detect_best();
/// Returns false (and keeps the current table) when the backend is unavailable.
bool set_backend(Backend backend);
std::string_view backend_name(Backend backend);

}  // namespace aep::simd
