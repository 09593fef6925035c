// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exhaustive exit-subset search on validation data.

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aep/costmodel.hpp"
#include "aep/data.hpp"
#include "aep/inference.hpp"
#include "aep/model.hpp"
#include "aep/weighting.hpp"

namespace aep {

inline constexpr std::size_t kMaxPrunableExits = 16;

/// Every non-empty mask over n exits, in binary-counting order of ExitMask::bits().
std::vector<ExitMask> enumerate_masks(std::size_t n);

struct MaskEvaluation {
  ExitMask mask;
  double val_top1 = 0.0;
  std::int64_t params = 0;
  std::int64_t macs = 0;
};

/// Scores one mask from cached logits with the restricted, unnormalized output weights.
MaskEvaluation evaluate_mask(const LogitSet& val, const ExitCostTable& costs, const ExitMask& mask,
                             const ExitWeights& weights);
/// Same, running the full model once over `val`.
MaskEvaluation evaluate_mask(const MultiExitModel& model, const ExitMask& mask,
                             const ExitWeights& weights, const Split& val);

struct PruneSelection {
  std::vector<MaskEvaluation> evaluations;  // enumeration order
  std::size_t chosen = 0;                   // index into evaluations

  [[nodiscard]] const MaskEvaluation& best() const { return evaluations.at(chosen); }
};

/// Max validation top-1; ties go to fewer active exits, then fewer MACs, then
/// enumeration order.
PruneSelection select_from_logits(const LogitSet& val, const ExitCostTable& costs,
                                  const ExitWeights& weights);

struct PruneReport {
  PruneSelection selection;
  std::optional<MultiExitModel> pruned;
  double test_top1 = 0.0;

  [[nodiscard]] const ExitMask& chosen_mask() const { return selection.best().mask; }
};

PruneReport select_best(const MultiExitModel& model, const ExitWeights& weights, const Split& val,
                        const Split& test, std::size_t batch_size = 256);

nlohmann::json to_json(const MaskEvaluation& e);
nlohmann::json to_json(const PruneReport& r);

}  // namespace aep
