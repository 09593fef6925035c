// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/harness/experiment.hpp"

#include <fstream>
#include <optional>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "aep/costmodel.hpp"
#include "aep/errors.hpp"
#include "aep/pruning.hpp"
#include "aep/random.hpp"

namespace aep::harness {
namespace fs = std::filesystem;
namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw StorageError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw StorageError("write failed: " + path.string());
}

nlohmann::json latency_meta(const LatencyStats& st) {
  return {{"median_ms", st.median_ms}, {"q1_ms", st.q1_ms},     {"q3_ms", st.q3_ms},
          {"min_ms", st.min_ms},       {"max_ms", st.max_ms},   {"warmup", st.warmup},
          {"reps", st.reps},           {"batch", st.batch},     {"exclusive", true},
          {"note", "wall-clock inference, single thread, measured with no concurrent load"}};
}

MultiExitModel build_model(const ExperimentConfig& c, const ImageShape& input,
                           std::size_t classes, std::span<const std::size_t> exit_stages) {
  BackboneOptions opt;
  opt.width_scale = c.width_scale;
  opt.seed = c.seed;
  Backbone backbone = build_backbone(c.backbone, input, opt);
  Rng rng(c.seed ^ 0xe417ULL);
  MultiExitModel model = attach_exits(std::move(backbone), exit_stages, classes, rng);
  if (c.mode == TrainingMode::kFinetune) {
    const Checkpoint init = load_checkpoint(c.init_checkpoint);
    copy_matching_state(init.model, model);
  }
  return model;
}

}  // namespace

fs::path default_store(const RunOptions& options) {
  return options.store.empty() ? options.out_dir / "results.jsonl" : options.store;
}

std::string run_identifier(const ExperimentConfig& c) {
  std::string id = fmt::format("{}_{}_{}_{}_e{}_s{}", c.dataset, c.backbone,
                               weight_mode_name(c.weights), c.scenario(),
                               exit_layout_name(c.exits), c.seed);
  if (c.subsample > 0.0) id += fmt::format("_n{}", c.subsample);
  for (char& ch : id)
    if (ch == '*' || ch == '/' || ch == ' ') ch = '-';
  return id;
}

LoadOptions load_options(const ExperimentConfig& c) {
  LoadOptions o;
  o.root = c.data_dir;
  o.image_size = c.image_size;
  o.subsample = c.subsample;
  o.seed = c.seed;
  o.synthetic_classes = c.synthetic_classes;
  o.synthetic_samples = c.synthetic_samples;
  return o;
}

nlohmann::json to_json(const TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_exit_losses", e.train_exit_losses},
                      {"val_loss", e.val_loss},
                      {"val_exit_losses", e.val_exit_losses},
                      {"seconds", e.seconds}});
  }
  return {{"epochs", epochs},
          {"best_epoch", h.best_epoch},
          {"best_val_loss", h.best_val_loss},
          {"stopped_early", h.stopped_early},
          {"total_seconds", h.total_seconds}};
}

ExitWeights checkpoint_weights(const nlohmann::json& meta, std::size_t n_exits) {
  if (meta.contains("output_weights")) {
    ExitWeights w;
    w.output = meta.at("output_weights").get<std::vector<double>>();
    w.loss = meta.value("loss_weights", w.output);
    if (w.output.size() != n_exits) throw FormatError("stored weights do not match exit count");
    return w;
  }
  return make_weights(parse_weight_mode(meta.value("weights", "unif")), n_exits);
}

SplitMetrics evaluate_logits(const LogitSet& logits, const ExitWeights& weights) {
  return {ensemble_accuracy(logits, weights.output), per_exit_accuracies(logits)};
}

SplitMetrics evaluate_split(const MultiExitModel& model, const ExitWeights& weights,
                            const Split& split) {
  return evaluate_logits(collect_logits(model, split), weights);
}

std::string metric_line(const ResultRecord& r) {
  return fmt::format(
      "run={} kind={} status={} dataset={} backbone={} weights={} scenario={} seed={} "
      "exits={} test_top1={:.6f} val_top1={:.6f} per_exit_test_top1=[{:.6f}] "
      "per_exit_val_top1=[{:.6f}] mask={} params={} macs={} epochs={} best_epoch={}",
      r.run_id, run_kind_name(r.kind), r.status, r.dataset, r.backbone, r.weights, r.scenario,
      r.seed, r.n_exits, r.test_top1, r.val_top1, fmt::join(r.per_exit_test_top1, ","),
      fmt::join(r.per_exit_val_top1, ","), r.chosen_mask.empty() ? "-" : r.chosen_mask,
      r.params, r.macs, r.epochs, r.best_epoch);
}

std::string timing_line(const ResultRecord& r) {
  return fmt::format("timing run={} kind={} latency_ms={:.4f} latency_iqr_ms={:.4f} train_s={:.2f}",
                     r.run_id, run_kind_name(r.kind), r.latency_ms, r.latency_iqr_ms,
                     r.train_seconds);
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config,
                                         const RunOptions& options) {
  config.validate();
  const DatasetSplits data = load_dataset(config.dataset, load_options(config));
  return run_experiment(config, data, options);
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config,
                                         const DatasetSplits& data, const RunOptions& options) {
  config.validate();
  const std::string run_id = run_identifier(config);
  const fs::path dir = options.out_dir / run_id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StorageError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  const fs::path store = default_store(options);
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  const ImageShape input{data.train.images.shape().c, config.image_size, config.image_size};
  const std::size_t classes = data.spec.num_classes;

  ResultRecord base;
  base.run_id = run_id;
  base.config = to_json(config);
  base.dataset = config.dataset;
  base.backbone = config.backbone;
  base.weights = std::string(weight_mode_name(config.weights));
  base.scenario = config.scenario();
  base.seed = config.seed;

  TrainConfig tc = config.train;
  tc.seed = config.seed;

  auto finish_costs = [&](ResultRecord& r, const MultiExitModel& m) {
    r.params = count_params(m);
    r.macs = count_macs(m, input);
    if (options.measure_latency) {
      const LatencyStats st = measure_latency(m, input, config.latency);
      r.latency_ms = st.median_ms;
      r.latency_iqr_ms = st.iqr_ms();
      r.latency = latency_meta(st);
    }
  };
  auto ckpt_meta = [&](RunKind kind, const ExitWeights& w) {
    return nlohmann::json{{"run_id", run_id},
                          {"kind", std::string(run_kind_name(kind))},
                          {"weights", base.weights},
                          {"loss_weights", w.loss},
                          {"output_weights", w.output},
                          {"config", base.config}};
  };

  std::vector<ResultRecord> out;
  RunKind current = RunKind::kBaseline;
  try {
    if (config.wants(RunKind::kBaseline)) {
      current = RunKind::kBaseline;
      log(fmt::format("[{}] baseline: training", run_id));
      const Backbone probe = build_backbone(config.backbone, input, {config.width_scale, 1, 0});
      const std::vector<std::size_t> last{probe.num_stages() - 1};
      MultiExitModel model = build_model(config, input, classes, last);
      const ExitWeights w = make_weights(WeightMode::kUnif, 1);
      const TrainHistory h = train_joint(model, w, data.train, data.val, tc, [&](const EpochRecord& e) {
        if (options.on_epoch) options.on_epoch(RunKind::kBaseline, e);
      });
      ResultRecord r = base;
      r.kind = RunKind::kBaseline;
      r.n_exits = 1;
      r.exit_stages = model.exit_stages();
      const SplitMetrics val = evaluate_split(model, w, data.val);
      const SplitMetrics test = evaluate_split(model, w, data.test);
      r.val_top1 = val.top1;
      r.per_exit_val_top1 = val.per_exit_top1;
      r.test_top1 = test.top1;
      r.per_exit_test_top1 = test.per_exit_top1;
      r.train_seconds = h.total_seconds;
      r.epochs = h.epochs.size();
      r.best_epoch = h.best_epoch;
      r.history_path = (dir / "baseline_history.json").string();
      r.checkpoint_path = (dir / "baseline.ckpt").string();
      write_json(r.history_path, to_json(h));
      save_checkpoint(r.checkpoint_path, model, ckpt_meta(RunKind::kBaseline, w));
      finish_costs(r, model);
      r.id = write_record(r, store);
      out.push_back(r);
    }

    if (config.wants(RunKind::kEE) || config.wants(RunKind::kEEPruned)) {
      current = RunKind::kEE;
      log(fmt::format("[{}] EE{}: training", run_id, base.weights));
      const Backbone probe = build_backbone(config.backbone, input, {config.width_scale, 1, 0});
      const auto stages = exit_stage_indices(probe.num_stages(), config.exits);
      MultiExitModel model = build_model(config, input, classes, stages);
      const ExitWeights w = make_weights(config.weights, stages.size());
      const TrainHistory h = train_joint(model, w, data.train, data.val, tc, [&](const EpochRecord& e) {
        if (options.on_epoch) options.on_epoch(RunKind::kEE, e);
      });
      const LogitSet val_logits = collect_logits(model, data.val);
      const LogitSet test_logits = collect_logits(model, data.test);
      save_logit_dump(dir / "ee_logits.aep", {{"val", val_logits}, {"test", test_logits}});
      const std::string history_path = (dir / "ee_history.json").string();
      write_json(history_path, to_json(h));
      const std::string ckpt = (dir / "ee.ckpt").string();
      save_checkpoint(ckpt, model, ckpt_meta(RunKind::kEE, w));

      ResultRecord r = base;
      r.kind = RunKind::kEE;
      r.n_exits = model.num_exits();
      r.exit_stages = model.exit_stages();
      const SplitMetrics val = evaluate_logits(val_logits, w);
      const SplitMetrics test = evaluate_logits(test_logits, w);
      r.val_top1 = val.top1;
      r.per_exit_val_top1 = val.per_exit_top1;
      r.test_top1 = test.top1;
      r.per_exit_test_top1 = test.per_exit_top1;
      r.train_seconds = h.total_seconds;
      r.epochs = h.epochs.size();
      r.best_epoch = h.best_epoch;
      r.history_path = history_path;
      r.checkpoint_path = ckpt;

      if (config.wants(RunKind::kEE)) {
        finish_costs(r, model);
        r.id = write_record(r, store);
        out.push_back(r);
      }

      if (config.wants(RunKind::kEEPruned)) {
        current = RunKind::kEEPruned;
        log(fmt::format("[{}] EE{}*: exhaustive exit-subset search", run_id, base.weights));
        const PruneSelection sel =
            select_from_logits(val_logits, exit_cost_table(model, input), w);
        const ExitMask& mask = sel.best().mask;
        const MultiExitModel pruned = extract_subnetwork(model, mask);
        const ExitWeights pw = restrict_weights(w, mask);
        const SplitMetrics pval = evaluate_split(pruned, pw, data.val);
        const SplitMetrics ptest = evaluate_split(pruned, pw, data.test);
        PruneReport report;
        report.selection = sel;
        report.test_top1 = ptest.top1;

        ResultRecord p = r;
        p.kind = RunKind::kEEPruned;
        p.n_exits = pruned.num_exits();
        p.exit_stages = pruned.exit_stages();
        p.chosen_mask = mask.str();
        p.val_top1 = sel.best().val_top1;
        p.per_exit_val_top1 = pval.per_exit_top1;
        p.test_top1 = ptest.top1;
        p.per_exit_test_top1 = ptest.per_exit_top1;
        p.prune_report_path = (dir / "prune_report.json").string();
        p.checkpoint_path = (dir / "ee_star.ckpt").string();
        write_json(p.prune_report_path, to_json(report));
        save_checkpoint(p.checkpoint_path, pruned, ckpt_meta(RunKind::kEEPruned, pw));
        finish_costs(p, pruned);
        p.id = write_record(p, store);
        out.push_back(p);
      }
    }
  } catch (const std::exception& e) {
    ResultRecord f = base;
    f.kind = current;
    f.status = "failed";
    f.error = e.what();
    try {
      write_record(f, store);
    } catch (const std::exception&) {
      // the original error is more useful
    }
    throw;
  }
  return out;
}

}  // namespace aep::harness
