// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/harness/report.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "aep/costmodel.hpp"
#include "aep/weighting.hpp"

namespace aep::harness {
namespace {

constexpr ReportMetric kMetrics[] = {ReportMetric::kTop1Percent, ReportMetric::kTop1Points,
                                     ReportMetric::kParams, ReportMetric::kMacs,
                                     ReportMetric::kLatency};

using BaselineKey = std::tuple<std::string, std::string, std::string, std::uint64_t, std::string>;

BaselineKey baseline_key(const ResultRecord& r) {
  std::string subsample;
  if (r.config.is_object() && r.config.contains("subsample")) {
    subsample = r.config.at("subsample").get<std::string>();
  }
  return {r.dataset, r.backbone, r.scenario, r.seed, subsample};
}

std::string column_name(const ResultRecord& r) {
  return fmt::format("EE{}{}", r.weights, r.kind == RunKind::kEEPruned ? "*" : "");
}

// Column order: weight modes in canonical order, each followed by its pruned variant.
int column_rank(const std::string& col) {
  static const std::vector<std::string> order = {"EEdesc", "EEdesc*", "EEasc", "EEasc*",
                                                 "EEmix",  "EEmix*",  "EEunif", "EEunif*"};
  const auto it = std::find(order.begin(), order.end(), col);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

std::string value_str(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : ""; }

}  // namespace

std::string_view group_by_name(GroupBy g) { return g == GroupBy::kNetwork ? "network" : "dataset"; }

GroupBy parse_group_by(std::string_view name) {
  if (name == "network") return GroupBy::kNetwork;
  if (name == "dataset") return GroupBy::kDataset;
  throw std::invalid_argument(fmt::format("unknown grouping '{}' (network or dataset)", name));
}

std::string_view report_metric_name(ReportMetric m) {
  switch (m) {
    case ReportMetric::kTop1Percent: return "top1_pct_change";
    case ReportMetric::kTop1Points: return "top1_pp_change";
    case ReportMetric::kParams: return "params_pct_change";
    case ReportMetric::kMacs: return "macs_pct_change";
    case ReportMetric::kLatency: return "latency_pct_change";
  }
  return "?";
}

std::optional<double> ReportTable::cell(std::string_view row, std::string_view column) const {
  const auto r = std::find(rows.begin(), rows.end(), row);
  const auto c = std::find(columns.begin(), columns.end(), column);
  if (r == rows.end() || c == columns.end()) return std::nullopt;
  return cells[static_cast<std::size_t>(r - rows.begin())][static_cast<std::size_t>(c - columns.begin())];
}

const ReportTable* Report::find(ReportMetric metric, std::string_view scenario) const {
  for (const auto& t : tables)
    if (t.metric == metric && t.scenario == scenario) return &t;
  return nullptr;
}

double compare_metric(ReportMetric metric, const ResultRecord& run, const ResultRecord& baseline) {
  switch (metric) {
    case ReportMetric::kTop1Percent: return percent_change(run.test_top1, baseline.test_top1);
    case ReportMetric::kTop1Points: return 100.0 * (run.test_top1 - baseline.test_top1);
    case ReportMetric::kParams:
      return percent_change(static_cast<double>(run.params), static_cast<double>(baseline.params));
    case ReportMetric::kMacs:
      return percent_change(static_cast<double>(run.macs), static_cast<double>(baseline.macs));
    case ReportMetric::kLatency: return percent_change(run.latency_ms, baseline.latency_ms);
  }
  throw std::invalid_argument("unknown report metric");
}

Report build_report(const std::vector<ResultRecord>& records, GroupBy group_by) {
  Report report;
  std::map<BaselineKey, const ResultRecord*> baselines;  // last one wins
  for (const auto& r : records) {
    if (r.status == "ok" && r.kind == RunKind::kBaseline) baselines[baseline_key(r)] = &r;
  }
  auto group_of = [&](const ResultRecord& r) {
    return group_by == GroupBy::kNetwork ? r.backbone : r.dataset;
  };

  std::set<std::string> scenarios;
  for (const auto& r : records)
    if (r.status == "ok") scenarios.insert(r.scenario);

  for (const auto& scenario : scenarios) {
    std::set<std::string> rows;
    std::set<std::string> cols;
    for (const auto& r : records) {
      if (r.status != "ok" || r.scenario != scenario) continue;
      rows.insert(group_of(r));
      if (r.kind != RunKind::kBaseline) cols.insert(column_name(r));
    }
    if (cols.empty()) continue;  // baselines only
    std::vector<std::string> columns(cols.begin(), cols.end());
    std::stable_sort(columns.begin(), columns.end(), [](const auto& a, const auto& b) {
      return column_rank(a) < column_rank(b);
    });
    for (ReportMetric metric : kMetrics) {
      ReportTable t;
      t.metric = metric;
      t.scenario = scenario;
      t.group_by = group_by;
      t.columns = columns;
      t.rows.assign(rows.begin(), rows.end());
      t.cells.assign(t.rows.size(), std::vector<std::optional<double>>(columns.size()));
      std::vector<std::vector<double>> sums(t.rows.size(), std::vector<double>(columns.size(), 0.0));
      std::vector<std::vector<std::size_t>> counts(t.rows.size(),
                                                   std::vector<std::size_t>(columns.size(), 0));
      for (const auto& r : records) {
        if (r.status != "ok" || r.scenario != scenario || r.kind == RunKind::kBaseline) continue;
        const auto b = baselines.find(baseline_key(r));
        if (b == baselines.end()) {
          if (metric == kMetrics[0]) ++report.unmatched;
          continue;
        }
        if (metric == ReportMetric::kLatency && b->second->latency_ms == 0.0) continue;
        if (metric == kMetrics[0]) ++report.compared;
        const auto ri = static_cast<std::size_t>(
            std::find(t.rows.begin(), t.rows.end(), group_of(r)) - t.rows.begin());
        const auto ci = static_cast<std::size_t>(
            std::find(columns.begin(), columns.end(), column_name(r)) - columns.begin());
        sums[ri][ci] += compare_metric(metric, r, *b->second);
        counts[ri][ci]++;
      }
      for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < columns.size(); ++j)
          if (counts[i][j] > 0) t.cells[i][j] = sums[i][j] / static_cast<double>(counts[i][j]);
      report.tables.push_back(std::move(t));
    }
  }
  return report;
}

std::string format_delimited(const Report& report, char d) {
  std::string out;
  for (const auto& t : report.tables) {
    out += fmt::format("# {} {} by {}\n", report_metric_name(t.metric), t.scenario,
                       group_by_name(t.group_by));
    out += group_by_name(t.group_by);
    for (const auto& c : t.columns) out += fmt::format("{}{}", d, c);
    out += "\n";
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      out += t.rows[i];
      for (const auto& v : t.cells[i]) out += fmt::format("{}{}", d, value_str(v));
      out += "\n";
    }
    out += "\n";
  }
  return out;
}

std::string format_grid(const Report& report) {
  std::string out;
  for (const auto& t : report.tables) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{std::string(group_by_name(t.group_by))};
    header.insert(header.end(), t.columns.begin(), t.columns.end());
    grid.push_back(header);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      std::vector<std::string> line{t.rows[i]};
      for (const auto& v : t.cells[i]) line.push_back(v ? fmt::format("{:+.2f}", *v) : "-");
      grid.push_back(line);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : grid)
      for (std::size_t j = 0; j < line.size(); ++j) width[j] = std::max(width[j], line[j].size());
    out += fmt::format("{} [{}]\n", report_metric_name(t.metric), t.scenario);
    for (const auto& line : grid) {
      for (std::size_t j = 0; j < line.size(); ++j) {
        out += j == 0 ? fmt::format("{:<{}}", line[j], width[j])
                      : fmt::format("  {:>{}}", line[j], width[j]);
      }
      out += "\n";
    }
    out += "\n";
  }
  return out;
}

}  // namespace aep::harness
