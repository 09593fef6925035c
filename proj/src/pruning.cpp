// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/pruning.hpp"

#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace aep {

std::vector<ExitMask> enumerate_masks(std::size_t n) {
  if (n == 0 || n > kMaxPrunableExits) {
    throw std::invalid_argument(fmt::format("enumerate_masks: n must be in [1, {}], got {}",
                                            kMaxPrunableExits, n));
  }
  std::vector<ExitMask> out;
  const std::uint64_t end = std::uint64_t{1} << n;
  out.reserve(end - 1);
  for (std::uint64_t bits = 1; bits < end; ++bits) out.push_back(ExitMask::from_bits(bits, n));
  return out;
}

MaskEvaluation evaluate_mask(const LogitSet& val, const ExitCostTable& costs, const ExitMask& mask,
                             const ExitWeights& weights) {
  if (mask.size() != val.num_exits() || weights.n_exits() != val.num_exits()) {
    throw std::invalid_argument("evaluate_mask: mask, weights and logits disagree on exit count");
  }
  if (val.size() == 0) throw std::invalid_argument("evaluate_mask: empty validation split");
  const ExitWeights w = restrict_weights(weights, mask);
  std::vector<Tensor> active;
  for (std::size_t i : mask.indices()) active.push_back(val.exits[i]);
  const auto pred = predict(active, w.output);
  return {mask, top1_accuracy(pred, val.targets), costs.params(mask), costs.macs(mask)};
}

MaskEvaluation evaluate_mask(const MultiExitModel& model, const ExitMask& mask,
                             const ExitWeights& weights, const Split& val) {
  if (mask.size() != model.num_exits()) throw std::invalid_argument("evaluate_mask: bad mask");
  if (val.empty()) throw std::invalid_argument("evaluate_mask: empty validation split");
  return evaluate_mask(collect_logits(model, val), exit_cost_table(model, model.input_shape()),
                       mask, weights);
}

PruneSelection select_from_logits(const LogitSet& val, const ExitCostTable& costs,
                                  const ExitWeights& weights) {
  PruneSelection sel;
  for (const auto& mask : enumerate_masks(val.num_exits())) {
    sel.evaluations.push_back(evaluate_mask(val, costs, mask, weights));
  }
  for (std::size_t i = 1; i < sel.evaluations.size(); ++i) {
    const auto& c = sel.evaluations[i];
    const auto& b = sel.evaluations[sel.chosen];
    bool better = c.val_top1 > b.val_top1;
    if (c.val_top1 == b.val_top1) {
      better = c.mask.count() < b.mask.count() ||
               (c.mask.count() == b.mask.count() && c.macs < b.macs);
    }
    if (better) sel.chosen = i;
  }
  return sel;
}

PruneReport select_best(const MultiExitModel& model, const ExitWeights& weights, const Split& val,
                        const Split& test, std::size_t batch_size) {
  if (val.empty() || test.empty()) throw std::invalid_argument("select_best: empty split");
  if (model.num_exits() > kMaxPrunableExits) {
    throw std::invalid_argument("select_best: too many exits for exhaustive search");
  }
  if (weights.n_exits() != model.num_exits()) {
    throw std::invalid_argument("select_best: weights do not match model exits");
  }
  PruneReport r;
  r.selection = select_from_logits(collect_logits(model, val, batch_size),
                                   exit_cost_table(model, model.input_shape()), weights);
  const ExitMask& mask = r.chosen_mask();
  r.pruned = extract_subnetwork(model, mask);
  const ExitWeights w = restrict_weights(weights, mask);
  const LogitSet t = collect_logits(*r.pruned, test, batch_size);
  r.test_top1 = top1_accuracy(predict(t.exits, w.output), t.targets);
  return r;
}

nlohmann::json to_json(const MaskEvaluation& e) {
  return {{"mask", e.mask.str()}, {"val_top1", e.val_top1}, {"params", e.params},
          {"macs", e.macs}};
}

nlohmann::json to_json(const PruneReport& r) {
  nlohmann::json evals = nlohmann::json::array();
  for (const auto& e : r.selection.evaluations) evals.push_back(to_json(e));
  return {{"evaluations", evals},
          {"chosen_mask", r.chosen_mask().str()},
          {"chosen_val_top1", r.selection.best().val_top1},
          {"test_top1", r.test_top1}};
}

}  // namespace aep
