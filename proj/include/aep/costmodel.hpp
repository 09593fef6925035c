// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Parameter, MAC and latency accounting.
//
// MAC convention: one multiply-accumulate counts once. Convolutions cost
// k_h * k_w * (C_in / groups) * C_out * H_out * W_out, dense layers in * out;
// normalization, activations, pooling and residual adds cost 0.

#include <cstdint>
#include <string>
#include <vector>

#include "aep/layers.hpp"
#include "aep/model.hpp"

namespace aep {

struct CostReport {
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::vector<LayerCost> breakdown;  // totals are the sums of these entries
};

CostReport cost_report(const MultiExitModel& model, const ImageShape& input);
std::int64_t count_params(const MultiExitModel& model);
/// Throws std::invalid_argument when shape inference fails for `input`.
std::int64_t count_macs(const MultiExitModel& model, const ImageShape& input);

/// Breakdown as a delimited table with header "name,kind,params,macs".
std::string breakdown_table(const CostReport& report, char delimiter = ',');

/// Cost of any exit subset without materializing the sub-network: stages up to
/// the deepest active exit plus the active heads.
struct ExitCostTable {
  std::vector<std::int64_t> stage_params;
  std::vector<std::int64_t> stage_macs;
  std::vector<std::int64_t> head_params;
  std::vector<std::int64_t> head_macs;
  std::vector<std::size_t> exit_stages;

  [[nodiscard]] std::int64_t params(const ExitMask& mask) const;
  [[nodiscard]] std::int64_t macs(const ExitMask& mask) const;
};

ExitCostTable exit_cost_table(const MultiExitModel& model, const ImageShape& input);

struct LatencyOptions {
  std::size_t warmup = 10;
  std::size_t reps = 100;
  std::size_t batch = 1;
};

struct LatencyStats {
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  double q1_ms = 0.0;
  double q3_ms = 0.0;
  std::size_t warmup = 0;
  std::size_t reps = 0;
  std::size_t batch = 0;
  std::vector<double> samples_ms;

  [[nodiscard]] double iqr_ms() const noexcept { return q3_ms - q1_ms; }
};

/// Order statistics of a sample set (linear interpolation between ranks).
LatencyStats summarize_latency(std::vector<double> samples_ms);

/// Wall-clock median of `reps` timed inference passes after `warmup` untimed
/// ones. Must run with the device otherwise idle.
LatencyStats measure_latency(const MultiExitModel& model, const ImageShape& input,
                             const LatencyOptions& options = {});

/// 100 * (new - baseline) / baseline; throws on a zero baseline.
double percent_change(double new_value, double baseline);

}  // namespace aep
