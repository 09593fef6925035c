// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment configuration: a flat "key = value" file. Blank lines and lines
// starting with '#' are ignored. Keys (defaults in brackets):
//
//   dataset            registry key                                 [cifar10]
//   data_dir           root holding the dataset folders             [data]
//   backbone           backbone registry key                        [micro-resnet-4]
//   exits              4 | full                                     [4]
//   weights            desc | asc | mix | unif                      [unif]
//   mode               scratch | finetune                           [scratch]
//   init_checkpoint    checkpoint to start from (finetune only)
//   image_size         square input side                            [64]
//   subsample          fraction, or total sample count when > 1     [dataset default]
//   seed               RNG seed for data, init and shuffling        [0]
//   runs               comma list of baseline, ee, ee*              [baseline,ee,ee*]
//   max_epochs, batch_size, learning_rate, patience                 [100, 64, 1e-4, 12]
//   width_scale                                                     [1]
//   latency_warmup, latency_reps, latency_batch                     [10, 100, 1]
//   synthetic_classes, synthetic_samples (synthetic-blobs only)     [2, 300]

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aep/costmodel.hpp"
#include "aep/model.hpp"
#include "aep/training.hpp"
#include "aep/weighting.hpp"

namespace aep::harness {

enum class TrainingMode { kScratch, kFinetune };
std::string_view training_mode_name(TrainingMode mode);
TrainingMode parse_training_mode(std::string_view name);

enum class RunKind { kBaseline, kEE, kEEPruned };
std::string_view run_kind_name(RunKind kind);  // "baseline", "EE", "EE*"
RunKind parse_run_kind(std::string_view name);  // case-insensitive

struct ExperimentConfig {
  std::string dataset = "cifar10";
  std::filesystem::path data_dir = "data";
  std::string backbone = "micro-resnet-4";
  ExitLayout exits = ExitLayout::kFour;
  WeightMode weights = WeightMode::kUnif;
  TrainingMode mode = TrainingMode::kScratch;
  std::filesystem::path init_checkpoint;
  std::size_t image_size = 64;
  double subsample = 0.0;
  std::uint64_t seed = 0;
  std::vector<RunKind> runs = {RunKind::kBaseline, RunKind::kEE, RunKind::kEEPruned};
  TrainConfig train;
  double width_scale = 1.0;
  LatencyOptions latency;
  std::size_t synthetic_classes = 2;
  std::size_t synthetic_samples = 300;

  /// Resolves registry keys and checks value ranges; throws std::invalid_argument
  /// or NotFoundError.
  void validate() const;
  /// "TRAIN-64", "FINETUNE-224", ...
  [[nodiscard]] std::string scenario() const;
  [[nodiscard]] bool wants(RunKind kind) const;
};

/// Applies one key/value pair; throws std::invalid_argument for unknown keys
/// or malformed values.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

ExperimentConfig parse_config(std::string_view text);
/// Throws NotFoundError when the file is missing.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Round-trips through set_config_value.
std::map<std::string, std::string> config_entries(const ExperimentConfig& config);
std::string format_config(const ExperimentConfig& config);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

}  // namespace aep::harness
