// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/weighting.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "aep/model.hpp"

namespace aep {

std::string_view weight_mode_name(WeightMode mode) {
  switch (mode) {
    case WeightMode::kDesc: return "desc";
    case WeightMode::kAsc: return "asc";
    case WeightMode::kMix: return "mix";
    case WeightMode::kUnif: return "unif";
  }
  throw std::invalid_argument("unknown weight mode");
}

WeightMode parse_weight_mode(std::string_view name) {
  for (WeightMode m : {WeightMode::kDesc, WeightMode::kAsc, WeightMode::kMix, WeightMode::kUnif}) {
    if (weight_mode_name(m) == name) return m;
  }
  throw std::invalid_argument(fmt::format("unknown weight mode '{}'", name));
}

std::vector<double> linear_ramp(std::size_t n, RampDirection direction) {
  if (n == 0) throw std::invalid_argument("linear_ramp needs n >= 1");
  std::vector<double> w(n);
  if (direction == RampDirection::kUniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
    return w;
  }
  const double total = static_cast<double>(n) * static_cast<double>(n + 1) / 2.0;
  for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<double>(i + 1) / total;
  if (direction == RampDirection::kDescending) std::reverse(w.begin(), w.end());
  return w;
}

ExitWeights make_weights(WeightMode mode, std::size_t n) {
  using enum RampDirection;
  switch (mode) {
    case WeightMode::kDesc: return {linear_ramp(n, kDescending), linear_ramp(n, kDescending)};
    case WeightMode::kAsc: return {linear_ramp(n, kAscending), linear_ramp(n, kAscending)};
    case WeightMode::kMix: return {linear_ramp(n, kDescending), linear_ramp(n, kAscending)};
    case WeightMode::kUnif: return {linear_ramp(n, kUniform), linear_ramp(n, kUniform)};
  }
  throw std::invalid_argument("unknown weight mode");
}

ExitWeights restrict_weights(const ExitWeights& w, const ExitMask& mask, bool renormalize) {
  if (mask.size() != w.n_exits() || w.output.size() != w.loss.size()) {
    throw std::invalid_argument(fmt::format("mask has {} entries, weights have {}", mask.size(),
                                            w.n_exits()));
  }
  if (mask.count() == 0) throw std::invalid_argument("mask has no active exit");
  ExitWeights out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    out.loss.push_back(w.loss[i]);
    out.output.push_back(w.output[i]);
  }
  if (renormalize) {
    for (auto* v : {&out.loss, &out.output}) {
      const double s = std::accumulate(v->begin(), v->end(), 0.0);
      for (double& x : *v) x /= s;
    }
  }
  return out;
}

}  // namespace aep
