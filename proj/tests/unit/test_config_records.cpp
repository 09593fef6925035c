// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>

#include "aep/errors.hpp"
#include "aep/harness/config.hpp"
#include "aep/harness/records.hpp"
#include "test_util.hpp"

namespace aep::harness {
namespace {

TEST(Config, DefaultsAndScenario) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.scenario(), "TRAIN-64");
  EXPECT_EQ(c.train.learning_rate, 1e-4);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_EQ(c.train.max_epochs, 100u);
  EXPECT_EQ(c.train.patience, 12u);
  EXPECT_EQ(c.latency.warmup, 10u);
  EXPECT_EQ(c.latency.reps, 100u);
  EXPECT_EQ(c.latency.batch, 1u);
  EXPECT_TRUE(c.wants(RunKind::kBaseline) && c.wants(RunKind::kEE) && c.wants(RunKind::kEEPruned));
}

TEST(Config, ParseText) {
  const auto c = parse_config(R"(
# comment
dataset = synthetic-blobs
weights = MIX
mode = finetune
init_checkpoint = /tmp/base.ckpt
image_size= 224
subsample =0.25
seed = 17
runs = ee*, EE, ee
max_epochs = 3
learning_rate = 2.5e-3
)");
  EXPECT_EQ(c.dataset, "synthetic-blobs");
  EXPECT_EQ(c.weights, WeightMode::kMix);
  EXPECT_EQ(c.mode, TrainingMode::kFinetune);
  EXPECT_EQ(c.scenario(), "FINETUNE-224");
  EXPECT_EQ(c.subsample, 0.25);
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.runs, (std::vector<RunKind>{RunKind::kEEPruned, RunKind::kEE}));
  EXPECT_FALSE(c.wants(RunKind::kBaseline));
  EXPECT_EQ(c.train.max_epochs, 3u);
  EXPECT_EQ(c.train.learning_rate, 2.5e-3);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW((void)parse_config("colour = red"), std::invalid_argument);
  EXPECT_THROW((void)parse_config("seed"), std::invalid_argument);
  EXPECT_THROW((void)parse_config("seed = -3"), std::invalid_argument);
  EXPECT_THROW((void)parse_config("image_size = 12px"), std::invalid_argument);
  EXPECT_THROW((void)parse_config("weights = sideways"), std::invalid_argument);
  EXPECT_THROW((void)parse_config("runs = baseline, nope"), std::invalid_argument);
  EXPECT_THROW((void)load_config("/nonexistent/aep.cfg"), NotFoundError);

  ExperimentConfig c;
  c.dataset = "imagenet";
  EXPECT_THROW(c.validate(), NotFoundError);
  c = {};
  c.backbone = "resnet-1000";
  EXPECT_THROW(c.validate(), NotFoundError);
  c = {};
  c.mode = TrainingMode::kFinetune;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.runs.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.image_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, TextAndJsonRoundTrip) {
  ExperimentConfig c;
  c.dataset = "gtsrb";
  c.exits = ExitLayout::kFull;
  c.weights = WeightMode::kAsc;
  c.subsample = 5000;
  c.seed = 99;
  c.runs = {RunKind::kEE};
  c.train.learning_rate = 3e-4;
  c.width_scale = 0.5;
  c.latency.reps = 7;
  const auto back = parse_config(format_config(c));
  EXPECT_EQ(config_entries(back), config_entries(c));
  EXPECT_EQ(config_entries(config_from_json(to_json(c))), config_entries(c));

  testing::TempDir tmp("cfg");
  {
    std::ofstream f(tmp / "a.cfg");
    f << format_config(c);
  }
  EXPECT_EQ(config_entries(load_config(tmp / "a.cfg")), config_entries(c));
}

ResultRecord sample_record(RunKind kind, double acc) {
  ResultRecord r;
  r.run_id = "r1";
  r.kind = kind;
  r.config = to_json(ExperimentConfig{});
  r.dataset = "cifar10";
  r.backbone = "micro-resnet-4";
  r.weights = "unif";
  r.scenario = "TRAIN-64";
  r.seed = 2;
  r.n_exits = 4;
  r.exit_stages = {0, 1, 2, 3};
  r.test_top1 = acc;
  r.val_top1 = acc + 0.01;
  r.per_exit_test_top1 = {0.1, 0.2, 0.3, acc};
  r.per_exit_val_top1 = {0.15, 0.25, 0.35, acc};
  r.chosen_mask = kind == RunKind::kEEPruned ? "0110" : "";
  r.params = 12345;
  r.macs = 678910;
  r.latency_ms = 1.25;
  r.latency_iqr_ms = 0.125;
  r.latency = {{"warmup", 10}, {"reps", 100}, {"batch", 1}};
  r.train_seconds = 3.5;
  r.epochs = 20;
  r.best_epoch = 8;
  r.history_path = "runs/h.csv";
  return r;
}

TEST(Records, JsonRoundTripAndSchema) {
  const auto r = sample_record(RunKind::kEEPruned, 0.625);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("schema_version"), kRecordSchemaVersion);
  EXPECT_EQ(record_from_json(j), r);

  auto bad = j;
  bad["schema_version"] = 99;
  EXPECT_THROW((void)record_from_json(bad), FormatError);
  bad = j;
  bad.erase("test_top1");
  EXPECT_THROW((void)record_from_json(bad), FormatError);
  bad = j;
  bad["kind"] = "mystery";
  EXPECT_THROW((void)record_from_json(bad), FormatError);
  bad = j;
  bad["params"] = "many";
  EXPECT_THROW((void)record_from_json(bad), FormatError);
  EXPECT_THROW((void)record_from_json(nlohmann::json::array()), FormatError);
}

TEST(Records, StoreAssignsIdsAndReadsBack) {
  testing::TempDir tmp("store");
  const auto store = tmp / "results.jsonl";
  EXPECT_TRUE(read_records(store).empty());
  EXPECT_EQ(write_record(sample_record(RunKind::kBaseline, 0.5), store), "1-baseline");
  EXPECT_EQ(write_record(sample_record(RunKind::kEE, 0.6), store), "2-EE");
  EXPECT_EQ(write_record(sample_record(RunKind::kEEPruned, 0.7), store), "3-EE*");
  const auto back = read_records(store);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].id, "2-EE");
  auto expect = sample_record(RunKind::kEE, 0.6);
  expect.id = "2-EE";
  EXPECT_EQ(back[1], expect);

  // every line is a standalone object with a schema version
  std::ifstream in(store);
  std::string line;
  while (std::getline(in, line)) {
    EXPECT_EQ(nlohmann::json::parse(line).at("schema_version"), kRecordSchemaVersion);
  }
}

TEST(Records, StoreErrors) {
  testing::TempDir tmp("store");
  // a directory cannot be opened for append
  EXPECT_THROW((void)write_record(sample_record(RunKind::kEE, 0.5), tmp.path()), StorageError);
  EXPECT_THROW((void)write_record(sample_record(RunKind::kEE, 0.5), tmp / "no" / "dir.jsonl"),
               StorageError);
  const auto store = tmp / "bad.jsonl";
  write_record(sample_record(RunKind::kEE, 0.5), store);
  {
    std::ofstream f(store, std::ios::app);
    f << "{not json\n";
  }
  EXPECT_THROW((void)read_records(store), FormatError);
}

TEST(Records, MergeRenumbers) {
  testing::TempDir tmp("merge");
  write_record(sample_record(RunKind::kBaseline, 0.1), tmp / "a.jsonl");
  write_record(sample_record(RunKind::kEE, 0.2), tmp / "a.jsonl");
  write_record(sample_record(RunKind::kEEPruned, 0.3), tmp / "b.jsonl");
  EXPECT_EQ(merge_stores({tmp / "a.jsonl", tmp / "b.jsonl", tmp / "missing.jsonl"},
                         tmp / "all.jsonl"),
            3u);
  const auto all = read_records(tmp / "all.jsonl");
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].id, "1-baseline");
  EXPECT_EQ(all[2].id, "3-EE*");
  EXPECT_EQ(all[2].test_top1, 0.3);
}

}  // namespace
}  // namespace aep::harness
