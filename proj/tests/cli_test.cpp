#include <gtest/gtest.h>

#include <json.hpp>

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "halo/analysis.hpp"
#include "halo/io.hpp"
#include "test_support.hpp"

namespace halo {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome halo_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "halo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> small_generate(const fs::path& out, const std::string& seed = "7") {
  return {"generate", "--out", out.string(), "--seed", seed, "--height", "16", "--width", "16",
          "--source-images", "4", "--target-images", "4", "--num-classes", "4", "--cells-per-image", "6"};
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tmp_ = new testing::TempDir;
    ASSERT_EQ(halo_cli(small_generate(data())).code, 0);
    const auto r = halo_cli({"pretrain", "--source", (data() / "source").string(), "--out",
                             pre().string(), "--pretrain-steps", "60", "--batch-size", "64",
                             "--hidden-dim", "8", "--embed-dim", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { delete tmp_; }

  static fs::path data() { return tmp_->path() / "data"; }
  static fs::path pre() { return tmp_->path() / "pre"; }
  static fs::path dir(const std::string& name) { return tmp_->path() / name; }

  static Outcome adapt(const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"adapt", "--checkpoint", pre().string(), "--source",
                                  (data() / "source").string(), "--target", (data() / "target").string(),
                                  "--out", dir(out).string(), "--budget", "0.05", "--rounds", "5",
                                  "--adapt-steps", "20", "--batch-size", "64"};
    args.insert(args.end(), extra.begin(), extra.end());
    return halo_cli(args);
  }

  static testing::TempDir* tmp_;
};

testing::TempDir* CliPipeline::tmp_ = nullptr;

TEST(CliGenerate, DeterministicAndSeeded) {
  testing::TempDir tmp;
  ASSERT_EQ(halo_cli(small_generate(tmp / "a")).code, 0);
  ASSERT_EQ(halo_cli(small_generate(tmp / "b")).code, 0);
  ASSERT_EQ(halo_cli(small_generate(tmp / "c", "8")).code, 0);
  EXPECT_EQ(io::sha256_directory(tmp / "a" / "source"), io::sha256_directory(tmp / "b" / "source"));
  EXPECT_EQ(io::sha256_directory(tmp / "a" / "target"), io::sha256_directory(tmp / "b" / "target"));
  EXPECT_NE(io::sha256_file(tmp / "a" / "source" / "labels.bin"),
            io::sha256_file(tmp / "c" / "source" / "labels.bin"));
}

TEST(CliGenerate, UsageErrors) {
  EXPECT_EQ(halo_cli({"generate"}).code, cli::kUsage);
  EXPECT_EQ(halo_cli({}).code, cli::kUsage);
  testing::TempDir tmp;
  EXPECT_EQ(halo_cli({"generate", "--out", (tmp / "x").string(), "--no-such-flag", "1"}).code, cli::kUsage);
  EXPECT_EQ(halo_cli({"generate", "--out", (tmp / "x").string(), "--num-classes", "1"}).code, cli::kUsage);
  EXPECT_EQ(halo_cli({"generate", "--help"}).code, cli::kOk);
}

TEST(CliGenerate, ConfigFileAndPrecedence) {
  testing::TempDir tmp;
  io::write_text(tmp / "cfg.json",
                 R"({"height": 8, "width": 12, "source-images": 2, "target-images": 3, "num-classes": 3, "cells-per-image": 4})");
  const auto r = halo_cli({"generate", "--config", (tmp / "cfg.json").string(), "--out",
                           (tmp / "d").string(), "--width", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ds = load_dataset(tmp / "d" / "target");
  EXPECT_EQ(ds.height, 8);
  EXPECT_EQ(ds.width, 10);
  EXPECT_EQ(ds.images, 3);
  const auto run = nlohmann::json::parse(io::read_text(tmp / "d" / "run.json"));
  EXPECT_EQ(run["config"]["width"], 10);
  EXPECT_EQ(run["config"]["height"], 8);

  io::write_text(tmp / "bad.json", R"({"height": 8, "colour": "red"})");
  EXPECT_EQ(halo_cli({"generate", "--config", (tmp / "bad.json").string(), "--out", (tmp / "e").string()}).code,
            cli::kUsage);
  io::write_text(tmp / "broken.json", "{ height: ");
  EXPECT_EQ(halo_cli({"generate", "--config", (tmp / "broken.json").string(), "--out", (tmp / "e").string()}).code,
            cli::kUsage);
}

TEST_F(CliPipeline, AdaptWritesRoundsAndLogs) {
  const auto r = adapt("adapt_a");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto eval = read_csv(dir("adapt_a") / "eval_rounds.csv");
  std::set<std::string> rounds;
  for (const auto& row : eval.rows) rounds.insert(row[static_cast<std::size_t>(eval.column("round"))]);
  EXPECT_EQ(rounds.size(), 5u);
  const auto log = read_acquisition_log(dir("adapt_a") / "acquisition_log.csv");
  EXPECT_EQ(log.size(), static_cast<std::size_t>(0.05 * 4 * 16 * 16));
  EXPECT_TRUE(fs::exists(dir("adapt_a") / "checkpoint" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir("adapt_a") / "training_log.csv"));
}

TEST_F(CliPipeline, ReplayReproducesCheckpoint) {
  ASSERT_EQ(adapt("adapt_r", {"--strategy", "entropy"}).code, 0);
  const auto r = halo_cli({"replay", "--run", (dir("adapt_r") / "run.json").string(), "--out",
                           dir("adapt_r2").string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(io::sha256_directory(dir("adapt_r") / "checkpoint"),
            io::sha256_directory(dir("adapt_r2") / "checkpoint"));

  auto run = nlohmann::json::parse(io::read_text(dir("adapt_r") / "run.json"));
  run["outputs"]["checkpoint"] = std::string(64, '0');
  io::write_text(dir("adapt_r") / "tampered.json", run.dump());
  const auto bad = halo_cli({"replay", "--run", (dir("adapt_r") / "tampered.json").string(), "--out",
                             dir("adapt_r3").string()});
  EXPECT_EQ(bad.code, cli::kFailure);
  EXPECT_NE(bad.out.find("DIFFERS"), std::string::npos);
}

TEST_F(CliPipeline, EvalPrintsClassRows) {
  const auto r = halo_cli({"eval", "--checkpoint", pre().string(), "--data", (data() / "source").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int rows = 0;
  double miou = -1;
  while (std::getline(lines, line)) {
    if (line.rfind("class_", 0) == 0) ++rows;
    if (line.rfind("mIoU", 0) == 0) miou = std::stod(line.substr(4));
  }
  EXPECT_EQ(rows, 4);
  EXPECT_GE(miou, 0.0);
  EXPECT_LE(miou, 1.0);
}

TEST_F(CliPipeline, SourceFreeAdaptation) {
  const auto r = halo_cli({"adapt", "--checkpoint", pre().string(), "--target", (data() / "target").string(),
                           "--out", dir("free").string(), "--budget", "0.05", "--rounds", "2",
                           "--adapt-steps", "10", "--batch-size", "32"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliPipeline, DataAndTrainingErrors) {
  fs::copy(data() / "target", dir("nolabels"), fs::copy_options::recursive);
  fs::remove(dir("nolabels") / "labels.bin");
  auto r = halo_cli({"adapt", "--checkpoint", pre().string(), "--target", dir("nolabels").string(), "--out",
                     dir("gt").string(), "--strategy", "gt-boundary", "--rounds", "1", "--adapt-steps", "5"});
  EXPECT_EQ(r.code, cli::kData);
  EXPECT_NE(r.err.find("labels.bin"), std::string::npos) << r.err;

  r = halo_cli({"eval", "--checkpoint", dir("missing").string(), "--data", (data() / "target").string()});
  EXPECT_EQ(r.code, cli::kData);
  EXPECT_NE(r.err.find("missing"), std::string::npos) << r.err;

  r = halo_cli({"adapt", "--checkpoint", pre().string(), "--target", (data() / "target").string(),
                "--out", dir("nosup").string(), "--budget", "0", "--rounds", "1", "--adapt-steps", "5"});
  EXPECT_EQ(r.code, cli::kTraining) << r.err;

  EXPECT_EQ(adapt("odd", {"--adapt-steps", "7"}).code, cli::kUsage);
  EXPECT_EQ(adapt("bad", {"--strategy", "coreset"}).code, cli::kUsage);
}

TEST_F(CliPipeline, AnalyzeAndReport) {
  ASSERT_EQ(adapt("adapt_an").code, 0);
  const auto r = halo_cli({"analyze", "--checkpoint", dir("adapt_an").string(), "--data",
                           (data() / "target").string(), "--log",
                           (dir("adapt_an") / "acquisition_log.csv").string(), "--source",
                           (data() / "source").string(), "--ensemble", "2", "--pretrain-steps", "20",
                           "--adapt-steps", "10", "--batch-size", "32", "--variance-log",
                           "0.05=" + (dir("adapt_an") / "acquisition_log.csv").string(), "--out",
                           dir("an").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_csv(dir("an") / "class_stats.csv").rows.size(), 4u);
  const auto corr = read_csv(dir("an") / "correlations.csv");
  bool found = false;
  for (const auto& row : corr.rows) found |= row[0] == "acquisition_vs_epistemic";
  EXPECT_TRUE(found);
  EXPECT_TRUE(fs::exists(dir("an") / "maps" / "epistemic.bin"));
  EXPECT_EQ(read_csv(dir("an") / "selection_distribution.csv").rows.size(), 5u * 4u);

  for (const auto& e : fs::directory_iterator(dir("an"))) {
    if (e.path().extension() == ".svg") fs::remove(e.path());
  }
  const auto rep = halo_cli({"report", "--dir", dir("an").string()});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_TRUE(fs::exists(dir("an") / "entropy_vs_accuracy.svg"));
  EXPECT_EQ(halo_cli({"report", "--dir", dir("nowhere").string()}).code, cli::kData);
}

}  // namespace
}  // namespace halo
