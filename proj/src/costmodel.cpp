// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/costmodel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "aep/random.hpp"

namespace aep {
namespace {

std::vector<Shape> stage_inputs(const MultiExitModel& model, const ImageShape& input) {
  if (input.channels != model.input_shape().channels) {
    throw std::invalid_argument(fmt::format("model expects {} input channels, got {}",
                                            model.input_shape().channels, input.channels));
  }
  std::vector<Shape> shapes;
  Shape s = input.batch(1);
  for (std::size_t i = 0; i < model.backbone().num_stages(); ++i) {
    shapes.push_back(s);
    s = model.backbone().stage(i).output_shape(s);
    if (s.h == 0 || s.w == 0) {
      throw std::invalid_argument(fmt::format("stage {} output is empty for this input", i));
    }
  }
  return shapes;
}

}  // namespace

CostReport cost_report(const MultiExitModel& model, const ImageShape& input) {
  CostReport r;
  const auto inputs = stage_inputs(model, input);
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    model.backbone().stage(s).cost_breakdown(fmt::format("stages.{}", s), inputs[s], r.breakdown);
  }
  for (std::size_t i = 0; i < model.num_exits(); ++i) {
    r.breakdown.push_back({fmt::format("exits.{}", i), "exit_head", model.head(i).param_count(),
                           model.head(i).macs()});
  }
  for (const auto& e : r.breakdown) {
    r.params += e.params;
    r.macs += e.macs;
  }
  return r;
}

std::int64_t count_params(const MultiExitModel& model) {
  std::int64_t total = model.backbone().param_count();
  for (std::size_t i = 0; i < model.num_exits(); ++i) total += model.head(i).param_count();
  return total;
}

std::int64_t count_macs(const MultiExitModel& model, const ImageShape& input) {
  return cost_report(model, input).macs;
}

std::string breakdown_table(const CostReport& report, char delimiter) {
  std::string out = fmt::format("name{0}kind{0}params{0}macs\n", delimiter);
  for (const auto& e : report.breakdown) {
    out += fmt::format("{1}{0}{2}{0}{3}{0}{4}\n", delimiter, e.name, e.kind, e.params, e.macs);
  }
  return out;
}

std::int64_t ExitCostTable::params(const ExitMask& mask) const {
  if (mask.size() != exit_stages.size()) throw std::invalid_argument("mask size mismatch");
  std::int64_t total = 0;
  for (std::size_t s = 0; s <= exit_stages[mask.deepest()]; ++s) total += stage_params[s];
  for (std::size_t i : mask.indices()) total += head_params[i];
  return total;
}

std::int64_t ExitCostTable::macs(const ExitMask& mask) const {
  if (mask.size() != exit_stages.size()) throw std::invalid_argument("mask size mismatch");
  std::int64_t total = 0;
  for (std::size_t s = 0; s <= exit_stages[mask.deepest()]; ++s) total += stage_macs[s];
  for (std::size_t i : mask.indices()) total += head_macs[i];
  return total;
}

ExitCostTable exit_cost_table(const MultiExitModel& model, const ImageShape& input) {
  ExitCostTable t;
  const auto inputs = stage_inputs(model, input);
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    std::vector<LayerCost> parts;
    model.backbone().stage(s).cost_breakdown("", inputs[s], parts);
    std::int64_t p = 0, m = 0;
    for (const auto& e : parts) {
      p += e.params;
      m += e.macs;
    }
    t.stage_params.push_back(p);
    t.stage_macs.push_back(m);
  }
  for (std::size_t i = 0; i < model.num_exits(); ++i) {
    t.head_params.push_back(model.head(i).param_count());
    t.head_macs.push_back(model.head(i).macs());
  }
  t.exit_stages = model.exit_stages();
  return t;
}

LatencyStats summarize_latency(std::vector<double> samples_ms) {
  if (samples_ms.empty()) throw std::invalid_argument("latency summary needs samples");
  LatencyStats st;
  st.samples_ms = samples_ms;
  std::sort(samples_ms.begin(), samples_ms.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(samples_ms.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, samples_ms.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return samples_ms[lo] + frac * (samples_ms[hi] - samples_ms[lo]);
  };
  st.min_ms = samples_ms.front();
  st.max_ms = samples_ms.back();
  st.median_ms = quantile(0.5);
  st.q1_ms = quantile(0.25);
  st.q3_ms = quantile(0.75);
  st.reps = samples_ms.size();
  return st;
}

LatencyStats measure_latency(const MultiExitModel& model, const ImageShape& input,
                             const LatencyOptions& options) {
  if (options.reps == 0 || options.batch == 0) {
    throw std::invalid_argument("latency needs reps >= 1 and batch >= 1");
  }
  Tensor x(input.batch(options.batch));
  Rng rng(0x1a7e);
  for (double& v : x.values()) v = rng.normal();
  using Clock = std::chrono::steady_clock;
  double sink = 0.0;
  for (std::size_t i = 0; i < options.warmup; ++i) sink += model.forward_all_exits(x)[0][0];
  std::vector<double> samples;
  samples.reserve(options.reps);
  for (std::size_t i = 0; i < options.reps; ++i) {
    const auto t0 = Clock::now();
    const auto out = model.forward_all_exits(x);
    const auto t1 = Clock::now();
    sink += out[0][0];
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  // Keeps the passes observable to the optimizer.
  if (std::isnan(sink)) samples.push_back(samples.back());
  LatencyStats st = summarize_latency(std::move(samples));
  st.warmup = options.warmup;
  st.batch = options.batch;
  return st;
}

double percent_change(double new_value, double baseline) {
  if (baseline == 0.0) throw std::invalid_argument("percent change against a zero baseline");
  return 100.0 * (new_value - baseline) / baseline;
}

}  // namespace aep
