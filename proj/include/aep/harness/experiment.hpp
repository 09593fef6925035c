// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aep/harness/config.hpp"
#include "aep/harness/datasets.hpp"
#include "aep/harness/records.hpp"
#include "aep/inference.hpp"
#include "aep/training.hpp"

namespace aep::harness {

struct RunOptions {
  std::filesystem::path out_dir = "runs";
  std::filesystem::path store;  // defaults to out_dir / "results.jsonl"
  bool measure_latency = true;
  std::function<void(RunKind, const EpochRecord&)> on_epoch;
  std::function<void(const std::string&)> log;
};

[[nodiscard]] std::filesystem::path default_store(const RunOptions& options);

/// Deterministic identifier of a config; names the artifact directory.
std::string run_identifier(const ExperimentConfig& config);

LoadOptions load_options(const ExperimentConfig& config);

/// Trains and evaluates the requested run kinds in the order baseline, EE,
/// EE*, persisting checkpoints, histories, logit dumps and prune reports under
/// out_dir/<run id>/ and appending one record per kind to the store. On
/// failure a record with status "failed" is appended before rethrowing.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& config,
                                         const RunOptions& options);
/// Same, with data already loaded.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& config,
                                         const DatasetSplits& data, const RunOptions& options);

nlohmann::json to_json(const TrainHistory& history);

/// Output weights stored with a checkpoint, or the mode given.
ExitWeights checkpoint_weights(const nlohmann::json& meta, std::size_t n_exits);

struct SplitMetrics {
  double top1 = 0.0;
  std::vector<double> per_exit_top1;
};
SplitMetrics evaluate_split(const MultiExitModel& model, const ExitWeights& weights,
                            const Split& split);
SplitMetrics evaluate_logits(const LogitSet& logits, const ExitWeights& weights);

/// One line per record with the deterministic metrics only.
std::string metric_line(const ResultRecord& record);
/// Timing fields that legitimately vary between identical runs.
std::string timing_line(const ResultRecord& record);

}  // namespace aep::harness
