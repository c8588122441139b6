// Drives the recipro binary end to end on the bundled synthetic corpus.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "recipro/hash.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("recipro_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    fs::copy_file(fs::path(RECIPRO_FIXTURE_DIR) / "synthetic_corpus.jsonl", dir_ / "corpus.jsonl");
    write_config({1, 2, 3});
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write_config(const std::vector<int>& seeds, const std::string& corpus = "corpus.jsonl",
                    std::vector<std::string> alphabet = {"F", "M"}) {
    nlohmann::json cfg = {
        {"output_root", "out"},
        {"seeds", seeds},
        {"datasets",
         {{{"id", "synth"},
           {"path", corpus},
           {"label_alphabet", alphabet},
           {"chunking", {{"char_limit", 1}}},
           {"balance", {{"level", "utterance"}, {"seed", 7}}},
           {"split", {{"seed", 11}}}}}},
        {"models", {{{"id", "tfidf-lr"}, {"kind", "baseline"}, {"train", {{"epochs", 50}, {"learning_rate", 0.5}}}}}},
    };
    std::ofstream(dir_ / "run.json") << cfg.dump(2);
  }

  Result run(const std::string& args, const std::string& env = "") {
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = env + " \"" RECIPRO_CLI "\" " + args + " 2>\"" + err.string() + "\" >/dev/null";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, recipro::read_file(err.string())};
  }

  std::string cfg() const { return "--config \"" + (dir_ / "run.json").string() + "\""; }
  fs::path out() const { return dir_ / "out"; }

  fs::path dir_;
};

std::map<std::string, std::string> digests_under(const fs::path& root) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) m[fs::relative(e.path(), root).string()] = recipro::file_digest(e.path().string());
  return m;
}

}  // namespace

TEST_F(Cli, FullRunProducesEveryArtifact) {
  const auto start = std::chrono::steady_clock::now();
  const auto r = run("run " + cfg());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(secs, 60.0);
  for (const char* rel :
       {"data/synth/records.jsonl", "data/synth/stats.csv", "data/synth/train.jsonl", "data/synth/split_manifest.json",
        "models/tfidf-lr/synth/seed-1/model.rpmod", "models/tfidf-lr/synth/seed-3/featurizer.rpfeat",
        "traces/tfidf-lr/synth/seed-2.jsonl", "eval/metrics.json", "transfer/transfer.json",
        "agreement/agreement.json", "report/tables/metrics.csv", "report/tables/dataset_stats.csv",
        "report/charts/balanced_accuracy.svg", "report/charts/kappa_synth.svg", "report/summary.md",
        "run_manifest.json"})
    EXPECT_TRUE(fs::exists(out() / rel)) << rel;

  // Three seeds aggregate into one row.
  std::ifstream csv(out() / "report/tables/metrics.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(row.rfind("tfidf-lr,synth,3,", 0), 0u) << row;

  const auto manifest = nlohmann::json::parse(recipro::read_file((out() / "run_manifest.json").string()));
  for (const char* stage : {"ingest/synth", "stats/synth", "prepare/synth", "train", "eval", "transfer", "agree", "report"})
    EXPECT_TRUE(manifest.at("stages").contains(stage)) << stage;

  // Second run skips everything and changes nothing.
  const auto before = digests_under(out());
  const auto again = run("run " + cfg());
  EXPECT_EQ(again.code, 0);
  EXPECT_NE(again.err.find("report: up to date"), std::string::npos);
  EXPECT_EQ(digests_under(out()), before);
}

TEST_F(Cli, PrepareTwiceIsUpToDate) {
  ASSERT_EQ(run("ingest " + cfg()).code, 0);
  ASSERT_EQ(run("prepare " + cfg()).code, 0);
  const auto before = digests_under(out());
  const auto r = run("prepare " + cfg());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("prepare/synth: up to date"), std::string::npos) << r.err;
  EXPECT_EQ(digests_under(out()), before);
}

TEST_F(Cli, MissingUpstreamNamesTheStage) {
  const auto r = run("train " + cfg());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("stale_upstream"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("prepare/synth"), std::string::npos) << r.err;
}

TEST_F(Cli, ChangedCorpusMakesDownstreamStale) {
  ASSERT_EQ(run("ingest " + cfg()).code, 0);
  ASSERT_EQ(run("prepare " + cfg()).code, 0);
  std::ofstream(dir_ / "corpus.jsonl", std::ios::app)
      << R"({"conversation_id":"extra","turn_index":0,"author_id":"x","recipient_id":"y","text":"hi","recipient_label":"F"})"
      << '\n';
  const auto r = run("train " + cfg());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ingest/synth"), std::string::npos) << r.err;
  // Re-running the named stage and its dependents recovers.
  EXPECT_EQ(run("ingest " + cfg()).code, 0);
  EXPECT_EQ(run("prepare " + cfg()).code, 0);
  EXPECT_EQ(run("train " + cfg()).code, 0);
}

TEST_F(Cli, TamperedOutputIsDetected) {
  ASSERT_EQ(run("ingest " + cfg()).code, 0);
  ASSERT_EQ(run("prepare " + cfg()).code, 0);
  std::ofstream(out() / "data/synth/test.jsonl", std::ios::app) << "\n";
  const auto r = run("train " + cfg());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("prepare/synth"), std::string::npos) << r.err;
  // prepare itself notices and rebuilds
  const auto p = run("prepare " + cfg());
  EXPECT_EQ(p.code, 0);
  EXPECT_NE(p.err.find("prepare/synth: running"), std::string::npos) << p.err;
}

TEST_F(Cli, SeedAndOutOverrides) {
  const auto alt = dir_ / "alt";
  ASSERT_EQ(run("run " + cfg() + " --seed 2 --out \"" + alt.string() + "\"").code, 0);
  EXPECT_TRUE(fs::exists(alt / "models/tfidf-lr/synth/seed-2/model.rpmod"));
  EXPECT_FALSE(fs::exists(alt / "models/tfidf-lr/synth/seed-1"));
  EXPECT_FALSE(fs::exists(out()));
}

TEST_F(Cli, ValidationErrorsExitOne) {
  EXPECT_EQ(run("ingest --config \"" + (dir_ / "nope.json").string() + "\"").code, 1);
  EXPECT_EQ(run("bogus " + cfg()).code, 1);
  EXPECT_EQ(run("ingest").code, 1);
  EXPECT_EQ(run("ingest " + cfg() + " --dataset unknown").code, 1);
  write_config({1}, "missing.jsonl");
  const auto r = run("ingest " + cfg());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing_path"), std::string::npos);
}

TEST_F(Cli, DataErrorsExitTwo) {
  // Every recipient labeled F once M is out of the alphabet: M lines are rejected
  // and balancing has no second class.
  write_config({1}, "corpus.jsonl", {"F", "X"});
  ASSERT_EQ(run("ingest " + cfg()).code, 0);
  const auto r = run("prepare " + cfg());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("degenerate_class"), std::string::npos) << r.err;
}

TEST_F(Cli, QuietLogging) {
  const auto r = run("ingest " + cfg(), "RECIPRO_LOG=quiet");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.err.empty()) << r.err;
  const auto v = run("stats " + cfg());
  EXPECT_NE(v.err.find("stats/synth"), std::string::npos);
}
