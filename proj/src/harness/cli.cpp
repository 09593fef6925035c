// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/harness/cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "aep/errors.hpp"
#include "aep/harness/config.hpp"
#include "aep/harness/datasets.hpp"
#include "aep/harness/experiment.hpp"
#include "aep/harness/records.hpp"
#include "aep/harness/report.hpp"
#include "aep/pruning.hpp"

namespace aep::harness {
namespace fs = std::filesystem;
namespace {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs";
  std::optional<double> subsample;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--seed", f.seed, "RNG seed (overrides the config file)");
  cmd->add_option("--out-dir", f.out_dir, "Directory for artifacts and the result store")
      ->capture_default_str();
  cmd->add_option("--subsample", f.subsample,
                  "Fraction of each split in (0,1], or a total sample count when > 1")
      ->check(CLI::NonNegativeNumber);
}

void apply_common(ExperimentConfig& c, const CommonFlags& f) {
  if (f.seed) c.seed = *f.seed;
  if (f.subsample) c.subsample = *f.subsample;
}

// One "key=v1,v2,..." sweep axis.
struct Axis {
  std::string key;
  std::vector<std::string> values;
};

Axis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw CLI::ValidationError("--axis", "expected key=v1,v2,... got '" + spec + "'");
  }
  Axis a{spec.substr(0, eq), {}};
  std::string rest = spec.substr(eq + 1);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const auto next = std::min(rest.find(',', pos), rest.size());
    if (next > pos) a.values.push_back(rest.substr(pos, next - pos));
    pos = next + 1;
  }
  if (a.values.empty()) throw CLI::ValidationError("--axis", "no values in '" + spec + "'");
  return a;
}

std::vector<ExperimentConfig> expand(const ExperimentConfig& base, const std::vector<Axis>& axes) {
  std::vector<ExperimentConfig> out{base};
  for (const auto& axis : axes) {
    std::vector<ExperimentConfig> next;
    for (const auto& c : out) {
      for (const auto& v : axis.values) {
        ExperimentConfig n = c;
        set_config_value(n, axis.key, v);
        next.push_back(std::move(n));
      }
    }
    out = std::move(next);
  }
  return out;
}

RunOptions run_options(const CommonFlags& f, bool latency, bool verbose, std::ostream& err) {
  RunOptions o;
  o.out_dir = f.out_dir;
  o.measure_latency = latency;
  if (verbose) {
    o.log = [&err](const std::string& m) { err << m << "\n"; };
    o.on_epoch = [&err](RunKind k, const EpochRecord& e) {
      err << fmt::format("  {} epoch {} train_loss={:.5f} val_loss={:.5f}\n", run_kind_name(k),
                         e.epoch, e.train_loss, e.val_loss);
    };
  }
  return o;
}

int run_sweep(const std::vector<ExperimentConfig>& configs, const CommonFlags& f, std::size_t jobs,
              bool latency, bool verbose, std::ostream& out, std::ostream& err) {
  const fs::path shard_dir = fs::path(f.out_dir) / "shards";
  fs::create_directories(shard_dir);
  std::vector<fs::path> shards;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    shards.push_back(shard_dir / fmt::format("shard-{:04d}.jsonl", i));
    fs::remove(shards.back());
  }
  auto run_one = [&](std::size_t i) {
    RunOptions o = run_options(f, latency, verbose, err);
    o.store = shards[i];
    return run_experiment(configs[i], o);
  };
  int status = kExitOk;
  if (jobs <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) {
      try {
        run_one(i);
      } catch (const std::exception& e) {
        err << fmt::format("config {} failed: {}\n", i, e.what());
        status = kExitFailure;
      }
    }
  } else {
    // Independent worker processes, each owning its shard files.
    out.flush();
    err.flush();
    std::fflush(nullptr);
    std::vector<pid_t> pids;
    for (std::size_t w = 0; w < jobs && w < configs.size(); ++w) {
      const pid_t pid = fork();
      if (pid < 0) throw StorageError("fork failed");
      if (pid == 0) {
        int code = 0;
        for (std::size_t i = w; i < configs.size(); i += jobs) {
          try {
            run_one(i);
          } catch (const std::exception& e) {
            std::fprintf(stderr, "config %zu failed: %s\n", i, e.what());
            code = 1;
          }
        }
        std::fflush(nullptr);
        _exit(code);
      }
      pids.push_back(pid);
    }
    for (pid_t pid : pids) {
      int ws = 0;
      waitpid(pid, &ws, 0);
      if (!WIFEXITED(ws) || WEXITSTATUS(ws) != 0) status = kExitFailure;
    }
  }
  const fs::path store = fs::path(f.out_dir) / "results.jsonl";
  merge_stores(shards, store);
  for (const auto& r : read_records(store)) {
    bool mine = false;
    for (const auto& c : configs) mine = mine || r.run_id == run_identifier(c);
    if (mine && r.status == "ok") out << metric_line(r) << "\n";
  }
  return status;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Early-exit ensembles: train, prune, evaluate and report", "aep"};
  app.require_subcommand(1);
  app.fallthrough(false);

  CommonFlags train_f, prune_f, eval_f, report_f, sweep_f;
  std::string config_path, sweep_config;
  std::string runs_override;
  bool no_latency = false, quiet = false;

  auto* train = app.add_subcommand("train", "Train baseline / EE / EE* runs from a config file");
  add_common(train, train_f);
  train->add_option("--config", config_path, "Experiment config file")->required();
  train->add_option("--runs", runs_override, "Comma list of baseline, ee, ee*");
  train->add_flag("--no-latency", no_latency, "Skip latency measurement");
  train->add_flag("-q,--quiet", quiet, "No per-epoch progress on stderr");

  std::string ckpt_path, logits_path, weights_override;
  auto* prune = app.add_subcommand("prune", "Exit-subset search on a checkpoint and its logit dump");
  add_common(prune, prune_f);
  prune->add_option("--checkpoint", ckpt_path, "Multi-exit checkpoint")->required();
  prune->add_option("--logits", logits_path, "Logit dump with 'val' and 'test' splits")->required();
  prune->add_option("--weights", weights_override, "Output weights mode (default: from checkpoint)")
      ->check(CLI::IsMember({"desc", "asc", "mix", "unif"}));

  std::string eval_ckpt, eval_config, eval_split = "test";
  auto* eval = app.add_subcommand("eval", "Top-1 metrics of a checkpoint on one split");
  add_common(eval, eval_f);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint to evaluate")->required();
  eval->add_option("--config", eval_config, "Config naming the dataset")->required();
  eval->add_option("--split", eval_split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--weights", weights_override, "Output weights mode (default: from checkpoint)")
      ->check(CLI::IsMember({"desc", "asc", "mix", "unif"}));

  std::string store_path, group_by = "network", format = "grid";
  auto* report = app.add_subcommand("report", "Grouped percent-change tables from a result store");
  add_common(report, report_f);
  report->add_option("--store", store_path, "Result store (default: <out-dir>/results.jsonl)");
  report->add_option("--group-by", group_by, "network or dataset")
      ->check(CLI::IsMember({"network", "dataset"}))
      ->capture_default_str();
  report->add_option("--format", format, "grid, csv or tsv")
      ->check(CLI::IsMember({"grid", "csv", "tsv"}))
      ->capture_default_str();

  std::vector<std::string> axes;
  std::size_t jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Cartesian product of config axes");
  add_common(sweep, sweep_f);
  sweep->add_option("--config", sweep_config, "Base experiment config")->required();
  sweep->add_option("--axis", axes, "key=v1,v2,... (repeatable)");
  sweep->add_option("--jobs", jobs, "Parallel worker processes")->check(CLI::PositiveNumber);
  sweep->add_flag("--no-latency", no_latency, "Skip latency measurement");
  sweep->add_flag("-q,--quiet", quiet, "No per-epoch progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*train) {
      ExperimentConfig c = load_config(config_path);
      apply_common(c, train_f);
      if (!runs_override.empty()) set_config_value(c, "runs", runs_override);
      const auto records = run_experiment(c, run_options(train_f, !no_latency, !quiet, err));
      for (const auto& r : records) out << metric_line(r) << "\n";
      for (const auto& r : records) out << timing_line(r) << "\n";
      return kExitOk;
    }
    if (*prune) {
      const Checkpoint ck = load_checkpoint(ckpt_path);
      const auto dump = load_logit_dump(logits_path);
      if (!dump.contains("val") || !dump.contains("test")) {
        throw FormatError("logit dump needs 'val' and 'test' splits");
      }
      ExitWeights w = weights_override.empty()
                          ? checkpoint_weights(ck.meta, ck.model.num_exits())
                          : make_weights(parse_weight_mode(weights_override), ck.model.num_exits());
      const ImageShape input = ck.model.input_shape();
      const PruneSelection sel =
          select_from_logits(dump.at("val"), exit_cost_table(ck.model, input), w);
      const ExitMask& mask = sel.best().mask;
      const ExitWeights pw = restrict_weights(w, mask);
      const LogitSet& test = dump.at("test");
      std::vector<Tensor> active;
      for (std::size_t i : mask.indices()) active.push_back(test.exits[i]);
      PruneReport rep;
      rep.selection = sel;
      rep.test_top1 = top1_accuracy(predict(active, pw.output), test.targets);
      const MultiExitModel pruned = extract_subnetwork(ck.model, mask);
      fs::create_directories(prune_f.out_dir);
      nlohmann::json meta = ck.meta;
      meta["kind"] = "EE*";
      meta["loss_weights"] = pw.loss;
      meta["output_weights"] = pw.output;
      save_checkpoint(fs::path(prune_f.out_dir) / "pruned.ckpt", pruned, meta);
      std::ofstream(fs::path(prune_f.out_dir) / "prune_report.json") << to_json(rep).dump(2) << "\n";
      out << fmt::format("prune masks={} mask={} val_top1={:.6f} test_top1={:.6f} params={} macs={}\n",
                         sel.evaluations.size(), mask.str(), sel.best().val_top1, rep.test_top1,
                         sel.best().params, sel.best().macs);
      return kExitOk;
    }
    if (*eval) {
      ExperimentConfig c = load_config(eval_config);
      apply_common(c, eval_f);
      const Checkpoint ck = load_checkpoint(eval_ckpt);
      c.image_size = ck.model.input_shape().height;
      const DatasetSplits data = load_dataset(c.dataset, load_options(c));
      const Split& s = eval_split == "train" ? data.train : eval_split == "val" ? data.val : data.test;
      const ExitWeights w =
          weights_override.empty()
              ? checkpoint_weights(ck.meta, ck.model.num_exits())
              : make_weights(parse_weight_mode(weights_override), ck.model.num_exits());
      const SplitMetrics m = evaluate_split(ck.model, w, s);
      out << fmt::format("eval split={} samples={} exits={} top1={:.6f} per_exit_top1=[{:.6f}] "
                         "params={} macs={}\n",
                         eval_split, s.size(), ck.model.num_exits(), m.top1,
                         fmt::join(m.per_exit_top1, ","), count_params(ck.model),
                         count_macs(ck.model, ck.model.input_shape()));
      return kExitOk;
    }
    if (*report) {
      const fs::path store = store_path.empty() ? fs::path(report_f.out_dir) / "results.jsonl"
                                                : fs::path(store_path);
      const Report rep = build_report(read_records(store), parse_group_by(group_by));
      if (format == "grid") out << format_grid(rep);
      else out << format_delimited(rep, format == "csv" ? ',' : '\t');
      return kExitOk;
    }
    if (*sweep) {
      std::vector<Axis> parsed;
      for (const auto& a : axes) parsed.push_back(parse_axis(a));
      ExperimentConfig base = load_config(sweep_config);
      apply_common(base, sweep_f);
      const auto configs = expand(base, parsed);
      for (const auto& c : configs) c.validate();
      return run_sweep(configs, sweep_f, jobs, !no_latency, !quiet, out, err);
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace aep::harness
