#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <initializer_list>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "hncr/cli.hpp"
#include "hncr/model.hpp"
#include "hncr/synthetic.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using hncr::testing::read_file;
using hncr::testing::TempDir;

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hncr");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return hncr::cli::run(static_cast<int>(argv.size()), argv.data());
}

// Four users who each rated all twelve items, so every user graph is complete.
fs::path write_toy(const TempDir& dir) {
  std::string text;
  for (const char* u : {"a", "b", "c", "d"}) {
    for (int i = 0; i < 12; ++i) text += std::string(u) + "\tv" + std::to_string(i) + "\t1\n";
  }
  hncr::testing::write_file(dir / "toy.tsv", text);
  return dir / "toy.tsv";
}

fs::path write_blocks(const TempDir& dir, std::uint64_t seed, const char* name = "blocks.tsv") {
  hncr::synthetic::TwoBlockConfig cfg;
  cfg.users = 40;
  cfg.items = 60;
  cfg.min_activity = 5;
  cfg.max_activity = 20;
  cfg.seed = seed;
  hncr::synthetic::write_ratings(dir / name, hncr::synthetic::two_block(cfg));
  return dir / name;
}

std::vector<std::string> quick(const fs::path& dataset, const fs::path& out, std::initializer_list<std::string> extra = {}) {
  std::vector<std::string> a = {"--dataset",   dataset.string(), "--out", out.string(), "--seed", "3",
                                "--line-epochs", "5", "--latent-user", "8", "--latent-item", "8",
                                "--k-user",    "3", "--k-item", "3", "--dim", "4", "--epochs", "2",
                                "--batch",     "16", "--learning-rate", "0.01", "--ranking-negatives", "20",
                                "--top-k",     "2", "--top-k", "5", "--scatter-n", "7"};
  // Extra flags replace a default of the same name.
  for (auto it = extra.begin(); it != extra.end(); it += 2) {
    const auto hit = std::find(a.begin(), a.end(), *it);
    if (hit != a.end()) {
      *(hit + 1) = *(it + 1);
    } else {
      a.insert(a.end(), {*it, *(it + 1)});
    }
  }
  return a;
}

std::vector<std::string> cmd(const std::string& sub, std::vector<std::string> args) {
  args.insert(args.begin(), sub);
  return args;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

TEST(Cli, VariantLabels) {
  hncr::cli::RunConfig c;
  EXPECT_EQ(hncr::cli::variant_label(c), "HNCR");
  c.backend = "euclidean";
  c.weight_mode = "common";
  EXPECT_EQ(hncr::cli::variant_label(c), "ENCR-N");
  c = {};
  c.neighbor_mode = "cooccurrence";
  c.ablate = {"no_history"};
  EXPECT_EQ(hncr::cli::variant_label(c), "HNCR-C-H");
}

TEST(Cli, MissingDatasetIsInputErrorWithoutOutput) {
  TempDir dir("cli_missing");
  const fs::path out = dir / "out";
  EXPECT_EQ(run_cli(cmd("prepare", quick(dir / "nope.tsv", out))), hncr::cli::kInputError);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(run_cli({"prepare", "--out", out.string()}), hncr::cli::kInputError);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, BadFlagsAreInputErrors) {
  EXPECT_EQ(run_cli({"train", "--backend", "spherical"}), hncr::cli::kInputError);
  EXPECT_EQ(run_cli({}), hncr::cli::kInputError);
  EXPECT_EQ(run_cli({"--help"}), hncr::cli::kOk);
}

TEST(Cli, PrepareToyListsKNeighbors) {
  TempDir dir("cli_toy");
  const fs::path out = dir / "out";
  ASSERT_EQ(run_cli(cmd("prepare", quick(write_toy(dir), out))), hncr::cli::kOk);
  std::istringstream users(read_file(out / "user_neighbors.txt"));
  std::string line;
  std::getline(users, line);
  EXPECT_EQ(line.rfind("user 3 ", 0), 0u);
  std::size_t rows = 0;
  while (std::getline(users, line)) {
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    std::size_t n = 0;
    for (std::uint32_t v; ls >> v;) ++n;
    EXPECT_EQ(n, 3u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 4u);
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  EXPECT_TRUE(fs::exists(out / "user_latent.txt"));
  EXPECT_TRUE(fs::exists(out / "config.txt"));
}

TEST(Cli, PrepareIsByteIdentical) {
  TempDir dir("cli_rerun");
  const fs::path data = write_blocks(dir, 4);
  ASSERT_EQ(run_cli(cmd("prepare", quick(data, dir / "one"))), hncr::cli::kOk);
  ASSERT_EQ(run_cli(cmd("prepare", quick(data, dir / "two"))), hncr::cli::kOk);
  for (const char* f : {"manifest.json", "user_neighbors.txt", "item_neighbors.txt", "user_latent.txt",
                        "item_latent.txt", "prepare.json"}) {
    EXPECT_EQ(read_file(dir / "one" / f), read_file(dir / "two" / f)) << f;
  }
  // Different seeds give different splits.
  ASSERT_EQ(run_cli(cmd("prepare", quick(data, dir / "three", {"--seed", "4"}))), hncr::cli::kOk);
  EXPECT_NE(read_file(dir / "one" / "manifest.json"), read_file(dir / "three" / "manifest.json"));
}

TEST(Cli, ConfigFileWithFlagOverride) {
  TempDir dir("cli_config");
  const fs::path data = write_blocks(dir, 5);
  hncr::testing::write_file(dir / "run.toml", "dataset = \"" + data.string() + "\"\nk-user = 4\nline-epochs = 3\n");
  const fs::path out = dir / "out";
  ASSERT_EQ(run_cli({"prepare", "--config", (dir / "run.toml").string(), "--k-user", "2", "--out", out.string()}),
            hncr::cli::kOk);
  const std::string echo = read_file(out / "config.txt");
  EXPECT_NE(echo.find("k-user=2\n"), std::string::npos);
  EXPECT_NE(echo.find("line-epochs=3\n"), std::string::npos);
  EXPECT_EQ(read_file(out / "user_neighbors.txt").rfind("user 2 ", 0), 0u);
}

TEST(Cli, TrainEvaluateRankAnalyze) {
  TempDir dir("cli_pipeline");
  const fs::path data = write_blocks(dir, 6);
  const fs::path out = dir / "out";
  const auto args = quick(data, out);
  ASSERT_EQ(run_cli(cmd("prepare", args)), hncr::cli::kOk);
  ASSERT_EQ(run_cli(cmd("train", args)), hncr::cli::kOk);
  EXPECT_TRUE(fs::exists(out / "checkpoint.txt"));
  EXPECT_EQ(count_lines(read_file(out / "metrics.csv")), 3u);
  const auto meta = nlohmann::json::parse(read_file(out / "run.json"));
  EXPECT_EQ(meta["variant"], "HNCR");
  EXPECT_EQ(meta["seeds"]["root"], 3);

  ASSERT_EQ(run_cli(cmd("evaluate", args)), hncr::cli::kOk);
  const std::string report = read_file(out / "evaluation_summary.txt");
  EXPECT_NE(report.find("precision@5 = "), std::string::npos);
  EXPECT_NE(report.find("ranking_seed.0 = "), std::string::npos);
  const std::string csv = read_file(out / "evaluation.csv");
  ASSERT_EQ(run_cli(cmd("evaluate", args)), hncr::cli::kOk);
  EXPECT_EQ(read_file(out / "evaluation.csv"), csv);

  ASSERT_EQ(run_cli(cmd("rank", args)), hncr::cli::kOk);
  EXPECT_EQ(read_file(out / "recommendations.csv").rfind("user,rank,item,score\n", 0), 0u);

  ASSERT_EQ(run_cli(cmd("analyze", args)), hncr::cli::kOk);
  EXPECT_EQ(count_lines(read_file(out / "hierarchy_bins.csv")), 1u + 4u);
  EXPECT_EQ(count_lines(read_file(out / "embedding_scatter.csv")), 1u + 7u);
  EXPECT_TRUE(fs::exists(out / "sparsity_bins.csv"));

  // Histogram totals equal the training interaction count recorded in the manifest.
  const auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
  for (const char* side : {"user", "item"}) {
    std::istringstream h(read_file(out / (std::string(side) + "_degree_histogram.csv")));
    std::string line;
    std::getline(h, line);
    std::size_t total = 0;
    while (std::getline(h, line)) {
      const auto comma = line.find(',');
      total += std::stoul(line.substr(0, comma)) * std::stoul(line.substr(comma + 1));
    }
    EXPECT_EQ(total, manifest["train"].get<std::size_t>()) << side;
  }
}

TEST(Cli, AnalyzeWithoutCheckpointWritesHistogramsOnly) {
  TempDir dir("cli_analyze");
  const fs::path out = dir / "out";
  ASSERT_EQ(run_cli(cmd("analyze", quick(write_blocks(dir, 7), out))), hncr::cli::kOk);
  EXPECT_TRUE(fs::exists(out / "user_degree_histogram.csv"));
  EXPECT_FALSE(fs::exists(out / "hierarchy_bins.csv"));
}

TEST(Cli, EuclideanCheckpointIsTagged) {
  TempDir dir("cli_encr");
  const fs::path out = dir / "out";
  ASSERT_EQ(run_cli(cmd("train", quick(write_blocks(dir, 8), out,
                                       {"--backend", "euclidean", "--neighbor-mode", "cooccurrence"}))),
            hncr::cli::kOk);
  const auto ck = hncr::model::load_checkpoint(out / "checkpoint.txt");
  EXPECT_EQ(ck.hyper.geometry().backend, hncr::model::Backend::kEuclidean);
  EXPECT_EQ(ck.hyper.layers, 2u);
  EXPECT_EQ(ck.variant, "ENCR-C");
}

TEST(Cli, AblationRecordedInMetadata) {
  TempDir dir("cli_ablate");
  const fs::path out = dir / "out";
  // no_semantic needs no neighbor files.
  ASSERT_EQ(run_cli(cmd("train", quick(write_blocks(dir, 9), out, {"--ablate", "no_semantic"}))), hncr::cli::kOk);
  const auto meta = nlohmann::json::parse(read_file(out / "run.json"));
  EXPECT_EQ(meta["variant"], "HNCR-S");
}

TEST(Cli, TrainWithoutNeighborFilesFails) {
  TempDir dir("cli_noneighbors");
  EXPECT_EQ(run_cli(cmd("train", quick(write_blocks(dir, 10), dir / "out"))), hncr::cli::kInputError);
}

TEST(Cli, MismatchedCheckpointIsIncompatible) {
  TempDir dir("cli_mismatch");
  const fs::path first = write_blocks(dir, 11, "first.tsv");
  const fs::path second = write_blocks(dir, 12, "second.tsv");
  const fs::path out = dir / "out";
  ASSERT_EQ(run_cli(cmd("train", quick(first, out, {"--ablate", "no_semantic"}))), hncr::cli::kOk);
  EXPECT_EQ(run_cli(cmd("evaluate", quick(second, out))), hncr::cli::kIncompatible);
}

TEST(Cli, MismatchedWeightModeIsIncompatible) {
  TempDir dir("cli_weights");
  const fs::path data = write_blocks(dir, 13);
  const fs::path out = dir / "out";
  ASSERT_EQ(run_cli(cmd("prepare", quick(data, out))), hncr::cli::kOk);
  EXPECT_EQ(run_cli(cmd("train", quick(data, out, {"--weight-mode", "none"}))), hncr::cli::kIncompatible);
}

TEST(Cli, DivergenceIsTrainingFailure) {
  TempDir dir("cli_diverge");
  const fs::path out = dir / "out";
  const int rc = run_cli(cmd("train", quick(write_blocks(dir, 14), out,
                                            {"--backend", "euclidean", "--ablate", "no_semantic", "--learning-rate",
                                             "1e300", "--epochs", "5"})));
  EXPECT_EQ(rc, hncr::cli::kTrainingFailure);
  EXPECT_TRUE(fs::exists(out / "checkpoint.txt"));
}

}  // namespace
