// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/harness/records.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "aep/errors.hpp"

namespace aep::harness {
namespace {

std::size_t count_lines(const std::filesystem::path& store) {
  std::ifstream in(store);
  if (!in) return 0;
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

template <typename T>
T field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw FormatError(fmt::format("record is missing '{}'", key));
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("record field '{}': {}", key, e.what()));
  }
}

}  // namespace

nlohmann::json to_json(const ResultRecord& r) {
  return {
      {"schema_version", kRecordSchemaVersion},
      {"id", r.id},
      {"run_id", r.run_id},
      {"kind", std::string(run_kind_name(r.kind))},
      {"status", r.status},
      {"error", r.error},
      {"config", r.config},
      {"dataset", r.dataset},
      {"backbone", r.backbone},
      {"weights", r.weights},
      {"scenario", r.scenario},
      {"seed", r.seed},
      {"n_exits", r.n_exits},
      {"exit_stages", r.exit_stages},
      {"test_top1", r.test_top1},
      {"val_top1", r.val_top1},
      {"per_exit_test_top1", r.per_exit_test_top1},
      {"per_exit_val_top1", r.per_exit_val_top1},
      {"chosen_mask", r.chosen_mask},
      {"params", r.params},
      {"macs", r.macs},
      {"latency_ms", r.latency_ms},
      {"latency_iqr_ms", r.latency_iqr_ms},
      {"latency", r.latency},
      {"train_seconds", r.train_seconds},
      {"epochs", r.epochs},
      {"best_epoch", r.best_epoch},
      {"history_path", r.history_path},
      {"checkpoint_path", r.checkpoint_path},
      {"prune_report_path", r.prune_report_path},
  };
}

ResultRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("record is not a JSON object");
  const int version = field<int>(j, "schema_version");
  if (version != kRecordSchemaVersion) {
    throw FormatError(fmt::format("unsupported record schema_version {}", version));
  }
  ResultRecord r;
  r.id = field<std::string>(j, "id");
  r.run_id = field<std::string>(j, "run_id");
  try {
    r.kind = parse_run_kind(field<std::string>(j, "kind"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  r.status = field<std::string>(j, "status");
  r.error = field<std::string>(j, "error");
  r.config = field<nlohmann::json>(j, "config");
  r.dataset = field<std::string>(j, "dataset");
  r.backbone = field<std::string>(j, "backbone");
  r.weights = field<std::string>(j, "weights");
  r.scenario = field<std::string>(j, "scenario");
  r.seed = field<std::uint64_t>(j, "seed");
  r.n_exits = field<std::size_t>(j, "n_exits");
  r.exit_stages = field<std::vector<std::size_t>>(j, "exit_stages");
  r.test_top1 = field<double>(j, "test_top1");
  r.val_top1 = field<double>(j, "val_top1");
  r.per_exit_test_top1 = field<std::vector<double>>(j, "per_exit_test_top1");
  r.per_exit_val_top1 = field<std::vector<double>>(j, "per_exit_val_top1");
  r.chosen_mask = field<std::string>(j, "chosen_mask");
  r.params = field<std::int64_t>(j, "params");
  r.macs = field<std::int64_t>(j, "macs");
  r.latency_ms = field<double>(j, "latency_ms");
  r.latency_iqr_ms = field<double>(j, "latency_iqr_ms");
  r.latency = field<nlohmann::json>(j, "latency");
  r.train_seconds = field<double>(j, "train_seconds");
  r.epochs = field<std::size_t>(j, "epochs");
  r.best_epoch = field<std::size_t>(j, "best_epoch");
  r.history_path = field<std::string>(j, "history_path");
  r.checkpoint_path = field<std::string>(j, "checkpoint_path");
  r.prune_report_path = field<std::string>(j, "prune_report_path");
  return r;
}

std::string write_record(const ResultRecord& record, const std::filesystem::path& store) {
  ResultRecord r = record;
  r.id = fmt::format("{}-{}", count_lines(store) + 1, run_kind_name(r.kind));
  const std::string line = to_json(r).dump() + "\n";
  std::ofstream out(store, std::ios::app | std::ios::binary);
  if (!out) {
    throw StorageError(fmt::format("cannot open result store {}: {}", store.string(),
                                   std::strerror(errno)));
  }
  out << line;
  out.flush();
  if (!out) throw StorageError("write to result store failed: " + store.string());
  return r.id;
}

std::vector<ResultRecord> read_records(const std::filesystem::path& store) {
  std::vector<ResultRecord> out;
  std::ifstream in(store);
  if (!in) return out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(fmt::format("{}:{}: {}", store.string(), n, e.what()));
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

std::size_t merge_stores(const std::vector<std::filesystem::path>& shards,
                         const std::filesystem::path& store) {
  std::size_t n = 0;
  for (const auto& s : shards) {
    for (const auto& r : read_records(s)) {
      write_record(r, store);
      ++n;
    }
  }
  return n;
}

}  // namespace aep::harness
