// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "aep/harness/cli.hpp"
#include "aep/harness/records.hpp"
#include "test_util.hpp"

namespace aep::harness {
namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "aep");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines_starting(const std::string& text, const std::string& prefix) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(prefix, 0) == 0) out.push_back(line);
  return out;
}

std::filesystem::path write_config(const testing::TempDir& dir) {
  const auto path = dir / "blobs.cfg";
  std::ofstream(path) << "dataset = synthetic-blobs\n"
                         "backbone = micro-resnet-4\n"
                         "image_size = 8\n"
                         "max_epochs = 2\n"
                         "batch_size = 32\n"
                         "learning_rate = 1e-3\n";
  return path;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"fly"}).code, kExitUsage);
  EXPECT_EQ(run({"train"}).code, kExitUsage);  // --config is required
  EXPECT_EQ(run({"train", "--config", "x.cfg", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--config", "x.cfg", "--seed", "abc"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--config", "x.cfg", "--subsample", "-1"}).code, kExitUsage);
  EXPECT_EQ(run({"report", "--format", "xml"}).code, kExitUsage);
  EXPECT_EQ(run({"sweep", "--config", "x.cfg", "--axis", "seed"}).code, kExitUsage);
  const auto r = run({"fly"});
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, HelpExitsZero) {
  const auto top = run({"--help"});
  EXPECT_EQ(top.code, kExitOk);
  for (const char* sub : {"train", "prune", "eval", "report", "sweep"}) {
    EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
    const auto h = run({sub, "--help"});
    EXPECT_EQ(h.code, kExitOk) << sub;
    EXPECT_NE(h.out.find("--seed"), std::string::npos) << sub;
    EXPECT_NE(h.out.find("--out-dir"), std::string::npos) << sub;
    EXPECT_NE(h.out.find("--subsample"), std::string::npos) << sub;
  }
}

TEST(Cli, RuntimeFailureExitsOne) {
  testing::TempDir tmp("cli");
  const auto r = run({"train", "--config", (tmp / "missing.cfg").string(), "--out-dir",
                      tmp.path().string()});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("missing.cfg"), std::string::npos);
}

TEST(Cli, TrainPruneEvalReport) {
  testing::TempDir a("a"), b("b");
  const auto cfg = write_config(a).string();
  const auto first = run({"train", "--config", cfg, "--out-dir", a.path().string(), "--seed", "3",
                          "--no-latency", "-q"});
  ASSERT_EQ(first.code, kExitOk) << first.err;
  const auto metrics = lines_starting(first.out, "run=");
  ASSERT_EQ(metrics.size(), 3u);
  EXPECT_EQ(lines_starting(first.out, "timing ").size(), 3u);
  EXPECT_NE(metrics[0].find("seed=3"), std::string::npos);

  // same seed, fresh directory: identical metric lines
  const auto second = run({"train", "--config", cfg, "--out-dir", b.path().string(), "--seed", "3",
                           "--no-latency", "-q"});
  ASSERT_EQ(second.code, kExitOk);
  EXPECT_EQ(lines_starting(second.out, "run="), metrics);

  const auto recs = read_records(a / "results.jsonl");
  ASSERT_EQ(recs.size(), 3u);
  const auto run_dir = std::filesystem::path(recs[1].checkpoint_path).parent_path();

  const auto p = run({"prune", "--checkpoint", recs[1].checkpoint_path, "--logits",
                      (run_dir / "ee_logits.aep").string(), "--out-dir", (a / "pruned").string()});
  ASSERT_EQ(p.code, kExitOk) << p.err;
  EXPECT_NE(p.out.find("masks=15 mask=" + recs[2].chosen_mask), std::string::npos) << p.out;
  EXPECT_TRUE(std::filesystem::exists(a / "pruned" / "pruned.ckpt"));

  const auto e = run({"eval", "--checkpoint", recs[2].checkpoint_path, "--config", cfg, "--seed",
                      "3"});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_NE(e.out.find(fmt::format("top1={:.6f}", recs[2].test_top1)), std::string::npos) << e.out;

  const auto rep = run({"report", "--out-dir", a.path().string(), "--format", "csv"});
  ASSERT_EQ(rep.code, kExitOk);
  EXPECT_NE(rep.out.find("# top1_pct_change TRAIN-8 by network"), std::string::npos);
  EXPECT_NE(rep.out.find("network,EEunif,EEunif*"), std::string::npos);
  EXPECT_EQ(run({"report", "--store", (a / "none.jsonl").string()}).out, "");
}

TEST(Cli, SweepRunsEveryCombination) {
  testing::TempDir tmp("sweep");
  const auto cfg = write_config(tmp).string();
  const auto r = run({"sweep", "--config", cfg, "--out-dir", tmp.path().string(), "--axis",
                      "weights=desc,asc", "--axis", "runs=ee", "--subsample", "120",
                      "--no-latency", "-q"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto recs = read_records(tmp / "results.jsonl");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].weights, "desc");
  EXPECT_EQ(recs[1].weights, "asc");
  EXPECT_EQ(lines_starting(r.out, "run=").size(), 2u);
}

}  // namespace
}  // namespace aep::harness
