// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace aep {

class ExitMask;

/// How loss weights (alpha) and output weights (beta) are laid out over exits.
///   DESC: alpha desc, beta desc     ASC:  alpha asc,  beta asc
///   MIX:  alpha desc, beta asc      UNIF: both uniform
enum class WeightMode { kDesc, kAsc, kMix, kUnif };

enum class RampDirection { kAscending, kDescending, kUniform };

/// Lowercase wire name: "desc" | "asc" | "mix" | "unif".
std::string_view weight_mode_name(WeightMode mode);
/// Throws std::invalid_argument for anything but the four wire names.
WeightMode parse_weight_mode(std::string_view name);

struct ExitWeights {
  std::vector<double> loss;    // alpha_1..alpha_N
  std::vector<double> output;  // beta_1..beta_N

  [[nodiscard]] std::size_t n_exits() const noexcept { return loss.size(); }
};

/// w_i = i / (n (n + 1) / 2) ascending, its reverse descending, 1/n uniform.
std::vector<double> linear_ramp(std::size_t n, RampDirection direction);

ExitWeights make_weights(WeightMode mode, std::size_t n);

/// Keeps the entries of active exits, in order. Without renormalization the
/// values are exactly the training-time weights; with it each vector sums to 1.
ExitWeights restrict_weights(const ExitWeights& w, const ExitMask& mask, bool renormalize = false);

}  // namespace aep
