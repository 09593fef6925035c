// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/inference.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

#include "aep/archive.hpp"
#include "aep/errors.hpp"
#include "aep/simd/kernels.hpp"

namespace aep {

Tensor ensemble_logits(std::span<const Tensor> outputs, std::span<const double> beta) {
  if (outputs.empty() || outputs.size() != beta.size()) {
    throw std::invalid_argument(fmt::format("{} outputs but {} output weights", outputs.size(),
                                            beta.size()));
  }
  const Shape s = outputs.front().shape();
  Tensor out(s, 0.0);
  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i].shape() != s) {
      throw std::invalid_argument(fmt::format("exit {} logits {} differ from {}", i,
                                              outputs[i].shape().str(), s.str()));
    }
    k.axpy(beta[i], outputs[i].data(), out.data(), out.size());
  }
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  const std::size_t rows = logits.shape().n;
  const std::size_t cols = logits.shape().sample();
  if (cols == 0) throw std::invalid_argument("argmax over zero classes");
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = logits.data() + r * cols;
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (p[c] > p[best]) best = c;
    }
    out[r] = best;
  }
  return out;
}

std::vector<std::size_t> predict(std::span<const Tensor> outputs, std::span<const double> beta) {
  return argmax_rows(ensemble_logits(outputs, beta));
}

double top1_accuracy(std::span<const std::size_t> predictions,
                     std::span<const std::size_t> targets) {
  if (predictions.empty()) throw std::invalid_argument("top1 of an empty set");
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("predictions and targets differ in length");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == targets[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

LogitSet collect_logits(const MultiExitModel& model, const Split& split, std::size_t batch_size) {
  if (split.empty()) throw std::invalid_argument("cannot evaluate an empty split");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  LogitSet out;
  out.targets = split.labels;
  const std::size_t n = split.size();
  const std::size_t c = model.num_classes();
  out.exits.assign(model.num_exits(), matrix(n, c));
  for (std::size_t first = 0; first < n; first += batch_size) {
    const std::size_t count = std::min(batch_size, n - first);
    const auto logits = model.forward_all_exits(split.images.slice_batch(first, count));
    for (std::size_t i = 0; i < logits.size(); ++i) {
      std::copy(logits[i].values().begin(), logits[i].values().end(),
                out.exits[i].values().begin() + static_cast<std::ptrdiff_t>(first * c));
    }
  }
  return out;
}

std::vector<double> per_exit_accuracies(const LogitSet& logits) {
  if (logits.size() == 0) throw std::invalid_argument("per-exit accuracy of an empty split");
  std::vector<double> acc;
  for (const auto& e : logits.exits) acc.push_back(top1_accuracy(argmax_rows(e), logits.targets));
  return acc;
}

std::vector<double> per_exit_accuracies(const MultiExitModel& model, const Split& split,
                                        std::size_t batch_size) {
  return per_exit_accuracies(collect_logits(model, split, batch_size));
}

double ensemble_accuracy(const LogitSet& logits, std::span<const double> beta) {
  return top1_accuracy(predict(logits.exits, beta), logits.targets);
}

void save_logit_dump(const std::filesystem::path& path,
                     const std::map<std::string, LogitSet>& splits) {
  Archive ar;
  ar.meta["kind"] = "aep-logits";
  ar.meta["splits"] = nlohmann::json::array();
  for (const auto& [name, set] : splits) {
    ar.meta["splits"].push_back(name);
    for (std::size_t i = 0; i < set.exits.size(); ++i) {
      const Shape& s = set.exits[i].shape();
      ar.add(fmt::format("{}.exit{}", name, i), {s.n, s.sample()}, set.exits[i].storage());
    }
    std::vector<std::int64_t> t(set.targets.begin(), set.targets.end());
    const std::size_t n = t.size();
    ar.add_ints(name + ".targets", {n}, std::move(t));
  }
  ar.save(path);
}

std::map<std::string, LogitSet> load_logit_dump(const std::filesystem::path& path) {
  const Archive ar = Archive::load(path);
  if (ar.meta.value("kind", "") != "aep-logits") {
    throw FormatError(fmt::format("'{}' is not a logit dump", path.string()));
  }
  std::map<std::string, LogitSet> out;
  for (const auto& name : ar.meta.at("splits")) {
    const auto split = name.get<std::string>();
    LogitSet set;
    const auto& t = ar.get(split + ".targets");
    if (!t.is_int) throw FormatError("targets must be i64");
    for (std::int64_t v : t.i64) {
      if (v < 0) throw FormatError("negative target in logit dump");
      set.targets.push_back(static_cast<std::size_t>(v));
    }
    for (std::size_t i = 0;; ++i) {
      const auto* a = ar.find(fmt::format("{}.exit{}", split, i));
      if (a == nullptr) break;
      if (a->is_int || a->dims.size() != 2 || a->dims[0] != set.targets.size()) {
        throw FormatError(fmt::format("bad logit array '{}'", a->name));
      }
      set.exits.emplace_back(Shape{a->dims[0], a->dims[1], 1, 1}, a->f64);
    }
    if (set.exits.empty()) throw FormatError(fmt::format("split '{}' has no exits", split));
    out.emplace(split, std::move(set));
  }
  return out;
}

}  // namespace aep
