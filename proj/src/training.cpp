// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace aep {
namespace {

void check_targets(const Tensor& logits, std::span<const std::size_t> targets) {
  const std::size_t b = logits.shape().n;
  const std::size_t c = logits.shape().sample();
  if (b == 0 || c == 0) throw std::invalid_argument("cross-entropy of an empty batch");
  if (targets.size() != b) {
    throw std::invalid_argument(fmt::format("{} targets for {} rows", targets.size(), b));
  }
  for (std::size_t t : targets) {
    if (t >= c) throw std::invalid_argument(fmt::format("target {} out of range [0, {})", t, c));
  }
}

// log(sum exp(z)) - z[t], max-shifted. The max term contributes exactly 1, so
// log1p keeps full precision when the softmax is nearly one-hot.
double neg_log_softmax(const double* z, std::size_t n, std::size_t t) {
  const std::size_t top = static_cast<std::size_t>(std::max_element(z, z + n) - z);
  const double m = z[top];
  double rest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != top) rest += std::exp(z[i] - m);
  }
  return (m - z[t]) + std::log1p(rest);
}

double log_sum_exp(const double* z, std::size_t n) {
  const double m = *std::max_element(z, z + n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(z[i] - m);
  return m + std::log(s);
}

}  // namespace

double cce_loss(const Tensor& logits, std::span<const std::size_t> targets) {
  check_targets(logits, targets);
  const std::size_t b = logits.shape().n;
  const std::size_t c = logits.shape().sample();
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const double* z = logits.data() + r * c;
    total += neg_log_softmax(z, c, targets[r]);
  }
  return total / static_cast<double>(b);
}

Tensor cce_gradient(const Tensor& logits, std::span<const std::size_t> targets, double scale) {
  check_targets(logits, targets);
  const std::size_t b = logits.shape().n;
  const std::size_t c = logits.shape().sample();
  Tensor g(logits.shape());
  for (std::size_t r = 0; r < b; ++r) {
    const double* z = logits.data() + r * c;
    double* d = g.data() + r * c;
    const double lse = log_sum_exp(z, c);
    for (std::size_t k = 0; k < c; ++k) {
      const double p = std::exp(z[k] - lse);
      d[k] = scale * (k == targets[r] ? p - 1.0 : p);
    }
  }
  return g;
}

double weighted_total_loss(std::span<const double> per_exit_losses,
                           std::span<const double> loss_weights) {
  if (per_exit_losses.size() != loss_weights.size()) {
    throw std::invalid_argument(fmt::format("{} losses but {} loss weights",
                                            per_exit_losses.size(), loss_weights.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < per_exit_losses.size(); ++i) {
    total += loss_weights[i] * per_exit_losses[i];
  }
  return total;
}

void TrainConfig::validate() const {
  if (max_epochs == 0 || batch_size == 0 || patience == 0 || eval_batch_size == 0) {
    throw std::invalid_argument("training counts must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

LossEvaluation evaluate_loss(const MultiExitModel& model, const ExitWeights& weights,
                             const Split& split, std::size_t batch_size) {
  if (weights.n_exits() != model.num_exits()) {
    throw std::invalid_argument(fmt::format("{} loss weights for {} exits", weights.n_exits(),
                                            model.num_exits()));
  }
  if (split.empty()) throw std::invalid_argument("cannot evaluate loss on an empty split");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  LossEvaluation out;
  out.per_exit.assign(model.num_exits(), 0.0);
  const std::size_t n = split.size();
  for (std::size_t first = 0; first < n; first += batch_size) {
    const std::size_t count = std::min(batch_size, n - first);
    const auto logits = model.forward_all_exits(split.images.slice_batch(first, count));
    const std::span<const std::size_t> targets(split.labels.data() + first, count);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      out.per_exit[i] += cce_loss(logits[i], targets) * static_cast<double>(count);
    }
  }
  for (double& l : out.per_exit) l /= static_cast<double>(n);
  out.total = weighted_total_loss(out.per_exit, weights.loss);
  return out;
}

Adam::Adam(double lr, double beta1, double beta2, double eps) {
  hyper_.lr = lr;
  hyper_.beta1 = beta1;
  hyper_.beta2 = beta2;
  hyper_.eps = eps;
}

void Adam::step(std::span<const ParamRef> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->size(), 0.0);
      v_.emplace_back(p.value->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("parameter set changed under Adam");
  ++t_;
  simd::AdamStep s = hyper_;
  s.bias_correction1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  s.bias_correction2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < params.size(); ++i) {
    k.adam_update(params[i].value->data(), params[i].grad->data(), m_[i].data(), v_[i].data(),
                  params[i].value->size(), s);
  }
}

namespace {

using State = std::vector<std::vector<double>>;

State snapshot(MultiExitModel& model) {
  State s;
  for (const auto& p : model.parameters()) s.push_back(p.value->storage());
  for (const auto& b : model.buffers()) s.push_back(b.value->storage());
  return s;
}

void restore(MultiExitModel& model, const State& s) {
  std::size_t i = 0;
  for (const auto& p : model.parameters()) p.value->storage() = s.at(i++);
  for (const auto& b : model.buffers()) b.value->storage() = s.at(i++);
}

}  // namespace

TrainHistory train_joint(MultiExitModel& model, const ExitWeights& weights, const Split& train,
                         const Split& val, const TrainConfig& config,
                         const EpochCallback& on_epoch) {
  config.validate();
  if (weights.n_exits() != model.num_exits()) {
    throw std::invalid_argument(fmt::format("{} loss weights for {} exits", weights.n_exits(),
                                            model.num_exits()));
  }
  if (train.empty() || val.empty()) throw std::invalid_argument("train and val splits must be non-empty");
  if (train.num_classes != model.num_classes() || val.num_classes != model.num_classes()) {
    throw std::invalid_argument("dataset class count does not match the model");
  }
  train.validate();
  val.validate();

  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();
  const std::size_t n_exits = model.num_exits();
  Rng rng(config.seed);
  Adam adam(config.learning_rate, config.beta1, config.beta2, config.eps);
  std::vector<std::size_t> order(train.size());

  TrainHistory history;
  State best_state;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t_epoch = Clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_exit_losses.assign(n_exits, 0.0);
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - first);
      const std::span<const std::size_t> idx(order.data() + first, count);
      const Tensor images = train.images.gather(idx);
      std::vector<std::size_t> targets(count);
      for (std::size_t i = 0; i < count; ++i) targets[i] = train.labels[idx[i]];

      model.zero_grad();
      const auto logits = model.forward_train(images);
      std::vector<double> losses(n_exits);
      std::vector<Tensor> grads;
      grads.reserve(n_exits);
      const double inv_b = 1.0 / static_cast<double>(count);
      for (std::size_t i = 0; i < n_exits; ++i) {
        losses[i] = cce_loss(logits[i], targets);
        grads.push_back(cce_gradient(logits[i], targets, weights.loss[i] * inv_b));
      }
      model.backward(grads);
      adam.step(model.parameters());

      rec.train_loss += weighted_total_loss(losses, weights.loss);
      for (std::size_t i = 0; i < n_exits; ++i) rec.train_exit_losses[i] += losses[i];
      ++batches;
    }
    rec.train_loss /= static_cast<double>(batches);
    for (double& l : rec.train_exit_losses) l /= static_cast<double>(batches);

    const LossEvaluation v = evaluate_loss(model, weights, val, config.eval_batch_size);
    rec.val_loss = v.total;
    rec.val_exit_losses = v.per_exit;
    rec.seconds = std::chrono::duration<double>(Clock::now() - t_epoch).count();
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (history.best_epoch == 0 || rec.val_loss < history.best_val_loss) {
      history.best_epoch = epoch;
      history.best_val_loss = rec.val_loss;
      best_state = snapshot(model);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      history.stopped_early = true;
      break;
    }
  }
  restore(model, best_state);
  history.total_seconds = std::chrono::duration<double>(Clock::now() - t_start).count();
  return history;
}

}  // namespace aep
