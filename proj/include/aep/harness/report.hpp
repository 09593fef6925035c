// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Grouped percent-change tables: every EE / EE* record is compared with the
// baseline record of the same dataset, backbone, scenario, seed and subsample,
// and per-group means are reported for each weight mode.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aep/harness/records.hpp"

namespace aep::harness {

enum class GroupBy { kNetwork, kDataset };
std::string_view group_by_name(GroupBy g);
GroupBy parse_group_by(std::string_view name);

enum class ReportMetric { kTop1Percent, kTop1Points, kParams, kMacs, kLatency };
std::string_view report_metric_name(ReportMetric m);

struct ReportTable {
  ReportMetric metric = ReportMetric::kTop1Percent;
  std::string scenario;
  GroupBy group_by = GroupBy::kNetwork;
  std::vector<std::string> columns;  // "EEdesc", "EEdesc*", ...
  std::vector<std::string> rows;     // group values, sorted
  std::vector<std::vector<std::optional<double>>> cells;  // [row][column]; empty = absent

  [[nodiscard]] std::optional<double> cell(std::string_view row, std::string_view column) const;
};

struct Report {
  std::vector<ReportTable> tables;  // scenario-major, metric order as in ReportMetric
  std::size_t compared = 0;          // records matched with a baseline
  std::size_t unmatched = 0;         // records without a baseline

  [[nodiscard]] bool empty() const noexcept { return tables.empty(); }
  [[nodiscard]] const ReportTable* find(ReportMetric metric, std::string_view scenario) const;
};

/// The compared metric of `run` against `baseline`: percent change of test
/// top-1, params, MACs or latency, or the top-1 difference in percentage points.
double compare_metric(ReportMetric metric, const ResultRecord& run, const ResultRecord& baseline);

/// Pure function of the record list; failed records are ignored.
Report build_report(const std::vector<ResultRecord>& records, GroupBy group_by);

/// Blocks of delimited text, one per table, with a "# metric scenario group" line
/// before the header. Values use the shortest exact decimal form; absent cells are empty.
std::string format_delimited(const Report& report, char delimiter = ',');
/// Aligned human-readable grid with two decimals; absent cells print as "-".
std::string format_grid(const Report& report);

}  // namespace aep::harness
