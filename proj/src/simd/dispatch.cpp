// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "aep/simd/kernels.hpp"

namespace aep::simd {

#if defined(AEP_HAVE_AVX2)
namespace avx2 {
const KernelTable& table();
}
#endif
#if defined(AEP_HAVE_NEON)
namespace neon {
const KernelTable& table();
}
#endif

const KernelTable* avx2_kernels() {
#if defined(AEP_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(AEP_HAVE_NEON)
  return &neon::table();
#else
  return nullptr;
#endif
}

Backend detect_best() {
  if (avx2_kernels() != nullptr) return Backend::kAvx2;
  if (neon_kernels() != nullptr) return Backend::kNeon;
  return Backend::kScalar;
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

namespace {

const KernelTable* lookup(Backend backend) {
  switch (backend) {
    case Backend::kScalar: return &scalar_kernels();
    case Backend::kAvx2: return avx2_kernels();
    case Backend::kNeon: return neon_kernels();
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("AEP_SIMD")) {
    const std::string want(env);
    for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
      if (want == backend_name(b)) {
        if (const KernelTable* t = lookup(b)) return t;
      }
    }
  }
  return lookup(detect_best());
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

bool set_backend(Backend backend) {
  const KernelTable* t = lookup(backend);
  if (t == nullptr) return false;
  active().store(t, std::memory_order_relaxed);
  return true;
}

}  // namespace aep::simd
