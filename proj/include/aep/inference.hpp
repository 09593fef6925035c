// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aep/data.hpp"
#include "aep/model.hpp"
#include "aep/tensor.hpp"

namespace aep {

/// sum_i beta_i * O_i over raw logits (no softmax before summing).
Tensor ensemble_logits(std::span<const Tensor> outputs, std::span<const double> beta);

/// Row-wise argmax; exact ties resolve to the lowest class index.
std::vector<std::size_t> argmax_rows(const Tensor& logits);

/// argmax of ensemble_logits per row.
std::vector<std::size_t> predict(std::span<const Tensor> outputs, std::span<const double> beta);

double top1_accuracy(std::span<const std::size_t> predictions,
                     std::span<const std::size_t> targets);

/// Per-exit logits over a whole split, computed batch by batch in inference mode.
struct LogitSet {
  std::vector<Tensor> exits;  // N matrices of shape (samples, classes)
  std::vector<std::size_t> targets;

  [[nodiscard]] std::size_t num_exits() const noexcept { return exits.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return targets.size(); }
};

LogitSet collect_logits(const MultiExitModel& model, const Split& split,
                        std::size_t batch_size = 256);

/// Top-1 of argmax(O_i) for every exit.
std::vector<double> per_exit_accuracies(const LogitSet& logits);
std::vector<double> per_exit_accuracies(const MultiExitModel& model, const Split& split,
                                        std::size_t batch_size = 256);

double ensemble_accuracy(const LogitSet& logits, std::span<const double> beta);

/// Logit dump: arrays "<split>.exit<i>" (samples x classes, f64) and
/// "<split>.targets" (i64), meta {"kind": "aep-logits", "splits": [...]}.
void save_logit_dump(const std::filesystem::path& path,
                     const std::map<std::string, LogitSet>& splits);
std::map<std::string, LogitSet> load_logit_dump(const std::filesystem::path& path);

}  // namespace aep
