// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "aep/errors.hpp"
#include "aep/harness/datasets.hpp"

namespace aep::harness {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename T>
T parse_uint(std::string_view key, std::string_view v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw std::invalid_argument(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(out)) {
    throw std::invalid_argument(fmt::format("{}: expected a number, got '{}'", key, v));
  }
  return out;
}

std::string real_str(double v) { return fmt::format("{}", v); }

}  // namespace

std::string_view training_mode_name(TrainingMode mode) {
  return mode == TrainingMode::kScratch ? "scratch" : "finetune";
}

TrainingMode parse_training_mode(std::string_view name) {
  const std::string n = lower(name);
  if (n == "scratch") return TrainingMode::kScratch;
  if (n == "finetune") return TrainingMode::kFinetune;
  throw std::invalid_argument(fmt::format("unknown training mode '{}'", name));
}

std::string_view run_kind_name(RunKind kind) {
  switch (kind) {
    case RunKind::kBaseline: return "baseline";
    case RunKind::kEE: return "EE";
    case RunKind::kEEPruned: return "EE*";
  }
  return "?";
}

RunKind parse_run_kind(std::string_view name) {
  const std::string n = lower(trim(name));
  if (n == "baseline") return RunKind::kBaseline;
  if (n == "ee") return RunKind::kEE;
  if (n == "ee*") return RunKind::kEEPruned;
  throw std::invalid_argument(fmt::format("unknown run kind '{}'", name));
}

void ExperimentConfig::validate() const {
  if (!DatasetRegistry::contains(dataset)) {
    throw NotFoundError(fmt::format("unknown dataset '{}'", dataset));
  }
  if (!BackboneRegistry::contains(backbone)) {
    throw NotFoundError(fmt::format("unknown backbone '{}'", backbone));
  }
  if (image_size == 0) throw std::invalid_argument("image_size must be positive");
  if (subsample < 0.0) throw std::invalid_argument("subsample must be non-negative");
  if (width_scale <= 0.0) throw std::invalid_argument("width_scale must be positive");
  if (runs.empty()) throw std::invalid_argument("runs must name at least one run kind");
  if (mode == TrainingMode::kFinetune && init_checkpoint.empty()) {
    throw std::invalid_argument("finetune mode needs init_checkpoint");
  }
  if (latency.reps == 0 || latency.batch == 0) {
    throw std::invalid_argument("latency_reps and latency_batch must be positive");
  }
  train.validate();
}

std::string ExperimentConfig::scenario() const {
  return fmt::format("{}-{}", mode == TrainingMode::kScratch ? "TRAIN" : "FINETUNE", image_size);
}

bool ExperimentConfig::wants(RunKind kind) const {
  return std::find(runs.begin(), runs.end(), kind) != runs.end();
}

void set_config_value(ExperimentConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  if (key == "dataset") c.dataset = std::string(v);
  else if (key == "data_dir") c.data_dir = std::string(v);
  else if (key == "backbone") c.backbone = std::string(v);
  else if (key == "exits") c.exits = parse_exit_layout(v);
  else if (key == "weights") c.weights = parse_weight_mode(lower(v));
  else if (key == "mode") c.mode = parse_training_mode(v);
  else if (key == "init_checkpoint") c.init_checkpoint = std::string(v);
  else if (key == "image_size") c.image_size = parse_uint<std::size_t>(key, v);
  else if (key == "subsample") c.subsample = parse_real(key, v);
  else if (key == "seed") c.seed = parse_uint<std::uint64_t>(key, v);
  else if (key == "runs") {
    c.runs.clear();
    std::size_t pos = 0;
    while (pos <= v.size()) {
      const auto next = std::min(v.find(',', pos), v.size());
      const auto item = trim(v.substr(pos, next - pos));
      if (!item.empty()) {
        const RunKind k = parse_run_kind(item);
        if (!c.wants(k)) c.runs.push_back(k);
      }
      pos = next + 1;
    }
  } else if (key == "max_epochs") c.train.max_epochs = parse_uint<std::size_t>(key, v);
  else if (key == "batch_size") c.train.batch_size = parse_uint<std::size_t>(key, v);
  else if (key == "learning_rate") c.train.learning_rate = parse_real(key, v);
  else if (key == "patience") c.train.patience = parse_uint<std::size_t>(key, v);
  else if (key == "width_scale") c.width_scale = parse_real(key, v);
  else if (key == "latency_warmup") c.latency.warmup = parse_uint<std::size_t>(key, v);
  else if (key == "latency_reps") c.latency.reps = parse_uint<std::size_t>(key, v);
  else if (key == "latency_batch") c.latency.batch = parse_uint<std::size_t>(key, v);
  else if (key == "synthetic_classes") c.synthetic_classes = parse_uint<std::size_t>(key, v);
  else if (key == "synthetic_samples") c.synthetic_samples = parse_uint<std::size_t>(key, v);
  else throw std::invalid_argument(fmt::format("unknown config key '{}'", key));
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("config line {}: expected 'key = value'", line_no));
    }
    const std::string_view key = trim(line.substr(0, eq));
    try {
      set_config_value(c, key, line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("config line {}: {}", line_no, e.what()));
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::map<std::string, std::string> config_entries(const ExperimentConfig& c) {
  std::string runs;
  for (RunKind k : c.runs) runs += (runs.empty() ? "" : ",") + lower(run_kind_name(k));
  std::map<std::string, std::string> m = {
      {"dataset", c.dataset},
      {"data_dir", c.data_dir.string()},
      {"backbone", c.backbone},
      {"exits", std::string(exit_layout_name(c.exits))},
      {"weights", std::string(weight_mode_name(c.weights))},
      {"mode", std::string(training_mode_name(c.mode))},
      {"image_size", std::to_string(c.image_size)},
      {"subsample", real_str(c.subsample)},
      {"seed", std::to_string(c.seed)},
      {"runs", runs},
      {"max_epochs", std::to_string(c.train.max_epochs)},
      {"batch_size", std::to_string(c.train.batch_size)},
      {"learning_rate", real_str(c.train.learning_rate)},
      {"patience", std::to_string(c.train.patience)},
      {"width_scale", real_str(c.width_scale)},
      {"latency_warmup", std::to_string(c.latency.warmup)},
      {"latency_reps", std::to_string(c.latency.reps)},
      {"latency_batch", std::to_string(c.latency.batch)},
      {"synthetic_classes", std::to_string(c.synthetic_classes)},
      {"synthetic_samples", std::to_string(c.synthetic_samples)},
  };
  if (!c.init_checkpoint.empty()) m["init_checkpoint"] = c.init_checkpoint.string();
  return m;
}

std::string format_config(const ExperimentConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += fmt::format("{} = {}\n", k, v);
  return out;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(c)) j[k] = v;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  for (const auto& [k, v] : j.items()) set_config_value(c, k, v.get<std::string>());
  return c;
}

}  // namespace aep::harness
