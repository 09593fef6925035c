// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Append-only result store: one JSON object per line, each carrying
// "schema_version".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aep/harness/config.hpp"

namespace aep::harness {

inline constexpr int kRecordSchemaVersion = 1;

struct ResultRecord {
  std::string id;      // assigned by the store
  std::string run_id;  // shared by the records of one run_experiment call
  RunKind kind = RunKind::kEE;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  nlohmann::json config = nlohmann::json::object();  // snapshot, see config_entries()
  // Denormalized grouping keys.
  std::string dataset, backbone, weights, scenario;
  std::uint64_t seed = 0;
  std::size_t n_exits = 0;
  std::vector<std::size_t> exit_stages;
  double test_top1 = 0.0;
  double val_top1 = 0.0;
  std::vector<double> per_exit_test_top1;
  std::vector<double> per_exit_val_top1;
  std::string chosen_mask;  // EE* only
  std::int64_t params = 0;
  std::int64_t macs = 0;
  double latency_ms = 0.0;
  double latency_iqr_ms = 0.0;
  nlohmann::json latency = nlohmann::json::object();  // protocol metadata
  double train_seconds = 0.0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  std::string history_path;
  std::string checkpoint_path;
  std::string prune_report_path;  // EE* only

  friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

nlohmann::json to_json(const ResultRecord& r);
/// Throws FormatError on missing fields or an unsupported schema_version.
ResultRecord record_from_json(const nlohmann::json& j);

/// Appends one line and returns the record id "<line>-<kind>". Throws
/// StorageError when the store cannot be written.
std::string write_record(const ResultRecord& record, const std::filesystem::path& store);

/// Missing store reads as empty. Throws FormatError on a malformed line.
std::vector<ResultRecord> read_records(const std::filesystem::path& store);

/// Concatenates shard stores into `store` in the given order, renumbering ids.
std::size_t merge_stores(const std::vector<std::filesystem::path>& shards,
                         const std::filesystem::path& store);

}  // namespace aep::harness
