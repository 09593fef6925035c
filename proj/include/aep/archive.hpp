// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Self-describing array container used for checkpoints and logit dumps.
//
// Layout (little-endian):
//   8 bytes   magic "AEPARC01"
//   8 bytes   header length L (uint64)
//   L bytes   UTF-8 JSON header: {"meta": {...}, "arrays": [{"name", "dtype",
//             "dims", "offset", "count"}, ...]}
//   payload   raw array data; offsets are relative to the payload start
//
// dtype is "f64" (IEEE double) or "i64" (two's-complement int64).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace aep {

struct ArchiveArray {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> f64;
  std::vector<std::int64_t> i64;
  bool is_int = false;

  [[nodiscard]] std::size_t count() const noexcept { return is_int ? i64.size() : f64.size(); }
};

class Archive {
 public:
  nlohmann::json meta = nlohmann::json::object();

  void add(std::string name, std::vector<std::size_t> dims, std::vector<double> values);
  void add_ints(std::string name, std::vector<std::size_t> dims, std::vector<std::int64_t> values);

  [[nodiscard]] const ArchiveArray* find(std::string_view name) const;
  /// Throws NotFoundError when absent.
  [[nodiscard]] const ArchiveArray& get(std::string_view name) const;
  [[nodiscard]] const std::vector<ArchiveArray>& arrays() const noexcept { return arrays_; }

  /// Throws StorageError on I/O failure.
  void save(const std::filesystem::path& path) const;
  /// Throws NotFoundError for a missing file and FormatError for a corrupt one.
  static Archive load(const std::filesystem::path& path);

 private:
  std::vector<ArchiveArray> arrays_;
};

}  // namespace aep
