// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "aep/data.hpp"
#include "aep/model.hpp"
#include "aep/simd/kernels.hpp"
#include "aep/weighting.hpp"

namespace aep {

/// Mean categorical cross-entropy of raw logits, -(1/B) sum_b log softmax(z_b)[t_b],
/// evaluated with a max-shifted log-sum-exp.
double cce_loss(const Tensor& logits, std::span<const std::size_t> targets);

/// Gradient of scale * (sum_b CE_b) with respect to the logits:
/// scale * (softmax(z_b) - onehot(t_b)). Pass scale = alpha_i / B for exit i.
Tensor cce_gradient(const Tensor& logits, std::span<const std::size_t> targets, double scale);

/// sum_i alpha_i * L_i. Every exit, the last included, is weighted the same way.
double weighted_total_loss(std::span<const double> per_exit_losses,
                           std::span<const double> loss_weights);

struct TrainConfig {
  std::size_t max_epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::size_t patience = 12;  // epochs without validation-loss improvement
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;  // drives epoch shuffling
  std::size_t eval_batch_size = 256;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::vector<double> train_exit_losses;  // mean over mini-batches
  double val_loss = 0.0;
  std::vector<double> val_exit_losses;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_loss = 0.0;
  bool stopped_early = false;
  double total_seconds = 0.0;
};

struct LossEvaluation {
  double total = 0.0;
  std::vector<double> per_exit;
};

/// Inference-mode losses over a split; total == weighted_total_loss(per_exit, alpha).
LossEvaluation evaluate_loss(const MultiExitModel& model, const ExitWeights& weights,
                             const Split& split, std::size_t batch_size = 256);

/// Adam with PyTorch defaults and no weight decay.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<const ParamRef> params);
  [[nodiscard]] std::uint64_t steps() const noexcept { return t_; }

 private:
  simd::AdamStep hyper_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minimizes sum_i alpha_i * CE_i over mini-batches. Stops at max_epochs or
/// after `patience` epochs without a lower validation loss, then restores the
/// parameters (and normalization statistics) of the best epoch.
TrainHistory train_joint(MultiExitModel& model, const ExitWeights& weights, const Split& train,
                         const Split& val, const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

}  // namespace aep
