#include <filesystem>

#include <gtest/gtest.h>

#include "recipro/eval.hpp"
#include "support/oracles.hpp"

using namespace recipro;

namespace {

PredictionTrace make_trace(const std::vector<std::string>& truth, const std::vector<std::string>& pred,
                           const std::string& model = "m") {
  PredictionTrace t;
  t.model_id = model;
  t.dataset_id = "d";
  for (std::size_t i = 0; i < truth.size(); ++i) t.entries.push_back({"e" + std::to_string(i), truth[i], pred[i], 0.5});
  return t;
}

PredictionTrace from_correctness(const std::vector<int>& bits, const std::string& model) {
  std::vector<std::string> truth, pred;
  for (int b : bits) {
    truth.push_back("F");
    pred.push_back(b ? "F" : "M");
  }
  return make_trace(truth, pred, model);
}

std::vector<std::string> truths(const PredictionTrace& t) {
  std::vector<std::string> v;
  for (const auto& e : t.entries) v.push_back(e.truth);
  return v;
}
std::vector<std::string> preds(const PredictionTrace& t) {
  std::vector<std::string> v;
  for (const auto& e : t.entries) v.push_back(e.predicted);
  return v;
}

}  // namespace

TEST(Metrics, HandExample) {
  const auto m = compute_metrics(make_trace({"F", "M", "M", "M"}, {"F", "F", "M", "M"}));
  EXPECT_DOUBLE_EQ(m.per_class_recall.at("F"), 1.0);
  EXPECT_DOUBLE_EQ(m.per_class_recall.at("M"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.balanced_accuracy, 5.0 / 6.0);
  EXPECT_NEAR(m.balanced_accuracy, 0.8333, 1e-4);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  // precision F = 1/2, M = 1; F1 F = 2/3, M = 4/5
  EXPECT_DOUBLE_EQ(m.macro_precision, 0.75);
  EXPECT_DOUBLE_EQ(m.macro_f1, (2.0 / 3.0 + 0.8) / 2.0);
}

TEST(Metrics, PerfectPredictions) {
  const auto m = compute_metrics(make_trace({"a", "b", "c", "a"}, {"a", "b", "c", "a"}));
  for (double v : {m.balanced_accuracy, m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1}) EXPECT_EQ(v, 1.0);
}

TEST(Metrics, ZeroOverZeroPrecisionIsZero) {
  // Nothing is ever predicted M.
  const auto m = compute_metrics(make_trace({"F", "M"}, {"F", "F"}));
  EXPECT_DOUBLE_EQ(m.macro_precision, 0.25);
  EXPECT_DOUBLE_EQ(m.balanced_accuracy, 0.5);
}

TEST(Metrics, EmptyTraceIsFatal) {
  EXPECT_THROW(compute_metrics(PredictionTrace{}), Error);
}

TEST(Metrics, MatchBruteForceOracle) {
  Rng rng(123);
  for (int t = 0; t < 500; ++t) {
    const auto trace = oracle::random_trace(rng, 2 + uniform_below(rng, 3), 1 + uniform_below(rng, 300));
    const auto got = compute_metrics(trace);
    const auto want = oracle::metrics(truths(trace), preds(trace));
    EXPECT_NEAR(got.balanced_accuracy, want.balanced_accuracy, 1e-12);
    EXPECT_NEAR(got.accuracy, want.accuracy, 1e-12);
    EXPECT_NEAR(got.macro_precision, want.macro_precision, 1e-12);
    EXPECT_NEAR(got.macro_recall, want.macro_recall, 1e-12);
    EXPECT_NEAR(got.macro_f1, want.macro_f1, 1e-12);
    ASSERT_EQ(got.per_class_recall.size(), want.recall.size());
    double mean = 0.0;
    for (const auto& [label, r] : got.per_class_recall) {
      EXPECT_NEAR(r, want.recall.at(label), 1e-12);
      mean += r;
    }
    EXPECT_EQ(got.balanced_accuracy, mean / static_cast<double>(got.per_class_recall.size()));
  }
}

TEST(Metrics, InvariantUnderEntryOrder) {
  Rng rng(5);
  auto trace = oracle::random_trace(rng, 3, 100);
  const auto a = compute_metrics(trace);
  shuffle(std::span<TraceEntry>(trace.entries), rng);
  EXPECT_EQ(compute_metrics(trace), a);
}

TEST(Confusion, TotalEqualsTraceLength) {
  Rng rng(6);
  const auto trace = oracle::random_trace(rng, 4, 77);
  const auto cm = confusion_matrix(trace, {"L0", "L9"});
  EXPECT_EQ(cm.total(), 77u);
  EXPECT_EQ(cm.labels.size(), 5u);
}

TEST(Gap, Definition) {
  // recall F = 4/5, recall M = 7/10
  std::vector<std::string> truth, pred;
  for (int i = 0; i < 5; ++i) {
    truth.push_back("F");
    pred.push_back(i < 4 ? "F" : "M");
  }
  for (int i = 0; i < 10; ++i) {
    truth.push_back("M");
    pred.push_back(i < 7 ? "M" : "F");
  }
  const auto t = make_trace(truth, pred);
  EXPECT_NEAR(per_class_gap(t, "F", "M") * 100.0, 10.0, 1e-12);
  EXPECT_NEAR(per_class_gap(t, "M", "F") * 100.0, -10.0, 1e-12);
  EXPECT_EQ(per_class_gap(make_trace({"F", "M"}, {"F", "M"}), "F", "M"), 0.0);
  EXPECT_THROW(per_class_gap(t, "F", "X"), Error);
}

TEST(Summary, SampleStandardDeviation) {
  const auto s = summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(summarize({0.7}).std, 0.0);
}

TEST(Kappa, HandExample) {
  const auto r = kappa(from_correctness({1, 1, 0, 0}, "i"), from_correctness({1, 0, 1, 0}, "j"));
  EXPECT_DOUBLE_EQ(r.observed, 0.5);
  EXPECT_DOUBLE_EQ(r.chance, 0.5);
  ASSERT_TRUE(r.kappa);
  EXPECT_EQ(*r.kappa, 0.0);
}

TEST(Kappa, SelfAgreementAndSymmetry) {
  Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + uniform_below(rng, 200);
    const auto a = oracle::random_trace(rng, 2 + uniform_below(rng, 3), n, "a");
    auto b = oracle::random_trace(rng, 2, n, "b");
    for (std::size_t i = 0; i < n; ++i) b.entries[i].truth = a.entries[i].truth;
    for (auto mode : {KappaMode::correctness, KappaMode::labels}) {
      const auto self = kappa(a, a, mode);
      if (!self.degenerate()) {
        EXPECT_EQ(*self.kappa, 1.0);
      }
      const auto ab = kappa(a, b, mode), ba = kappa(b, a, mode);
      EXPECT_EQ(ab.kappa, ba.kappa);
      EXPECT_EQ(ab.observed, ba.observed);
      EXPECT_EQ(ab.chance, ba.chance);
    }
  }
}

TEST(Kappa, MatchesDefinitionOracle) {
  Rng rng(78);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + uniform_below(rng, 100);
    const auto a = oracle::random_trace(rng, 2 + uniform_below(rng, 2), n, "a");
    auto b = oracle::random_trace(rng, 3, n, "b");
    for (std::size_t i = 0; i < n; ++i) b.entries[i].truth = a.entries[i].truth;
    // Reversed order on one side: matching is by example id, not position.
    auto b_rev = b;
    std::reverse(b_rev.entries.begin(), b_rev.entries.end());

    const auto got = kappa(a, b_rev, KappaMode::correctness);
    const auto want = oracle::kappa(oracle::correctness(a), oracle::correctness(b));
    EXPECT_NEAR(got.observed, static_cast<double>(want.p), 1e-12);
    EXPECT_NEAR(got.chance, static_cast<double>(want.r), 1e-12);
    EXPECT_EQ(got.degenerate(), want.degenerate);
    if (!want.degenerate) {
      EXPECT_NEAR(*got.kappa, static_cast<double>(want.kappa), 1e-12);
    }

    const auto gl = kappa(a, b_rev, KappaMode::labels);
    const auto wl = oracle::kappa(preds(a), preds(b));
    EXPECT_EQ(gl.degenerate(), wl.degenerate);
    if (!wl.degenerate) {
      EXPECT_NEAR(*gl.kappa, static_cast<double>(wl.kappa), 1e-12);
    }
  }
}

TEST(Kappa, DegenerateWhenChanceIsOne) {
  const auto all_right = from_correctness({1, 1, 1}, "a");
  const auto r = kappa(all_right, all_right);
  EXPECT_TRUE(r.degenerate());
  EXPECT_EQ(to_json(r).at("kappa"), "degenerate");
}

TEST(Kappa, MismatchedExampleSets) {
  auto a = from_correctness({1, 0}, "a");
  auto b = from_correctness({1, 0}, "b");
  b.entries[1].example_id = "other";
  try {
    kappa(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.reason(), "example_set_mismatch");
  }
}

TEST(Trace, JsonlRoundTripAndDuplicateIds) {
  Rng rng(1);
  const auto t = oracle::random_trace(rng, 2, 20);
  const auto path = std::filesystem::temp_directory_path() / "recipro_trace.jsonl";
  write_trace(path.string(), t);
  EXPECT_EQ(read_trace(path.string()), t);
  std::filesystem::remove(path);
  auto dup = t;
  dup.entries[1].example_id = dup.entries[0].example_id;
  EXPECT_THROW(dup.validate(), Error);
}

namespace {

// Hashed baseline trained on a trivially separable toy set.
ScoringModel toy_model(const std::string& id, FeaturizerConfig fc = {}) {
  fc.hash_dims = 1u << 12;
  std::vector<std::string> texts{"red red", "blue blue", "red", "blue"};
  std::vector<std::string> labels{"F", "M", "F", "M"};
  const auto f = fit(texts, fc);
  std::vector<SparseVector> xs;
  for (const auto& t : texts) xs.push_back(f(t));
  TrainConfig c;
  c.epochs = 100;
  c.learning_rate = 1.0;
  ScoringModel sm;
  sm.model_id = id;
  sm.train_dataset = "toy";
  sm.model = train(std::span<const SparseVector>(xs), std::span<const std::string>(labels), FeatureSpace::hashed(fc), c);
  sm.featurizer = f;
  return sm;
}

TestSet toy_set(const std::string& id, std::vector<std::pair<std::string, std::string>> rows) {
  TestSet ts;
  ts.dataset_id = id;
  int k = 0;
  for (auto& [text, label] : rows) {
    ProfilingExample e;
    e.example_id = id + "/" + std::to_string(k++);
    e.recipient_id = e.example_id;
    e.label = label;
    e.text = text;
    ts.examples.push_back(e);
  }
  return ts;
}

}  // namespace

TEST(Transfer, DiagonalEqualsSameDomainMetrics) {
  const auto sm = toy_model("base");
  const auto a = toy_set("a", {{"red", "F"}, {"blue", "M"}, {"red blue red", "F"}});
  const auto b = toy_set("b", {{"blue red", "M"}, {"red", "M"}, {"blue", "F"}, {"green", "F"}});
  const auto matrix = transfer_eval({sm}, {a, b});
  ASSERT_EQ(matrix.size(), 2u);
  EXPECT_EQ(*matrix.at({"base", "toy", "a"}).metrics, compute_metrics(predict_trace(sm, a)));
  EXPECT_EQ(*matrix.at({"base", "toy", "b"}).metrics, compute_metrics(predict_trace(sm, b)));
  EXPECT_EQ(matrix.at({"base", "toy", "a"}).metrics->balanced_accuracy, 1.0);
}

TEST(Transfer, ConstantModelScoresHalfOnBalancedSets) {
  auto sm = toy_model("const");
  std::fill(sm.model.weights.begin(), sm.model.weights.end(), 0.0);
  sm.model.bias = 3.0;
  const auto a = toy_set("a", {{"red", "F"}, {"blue", "M"}});
  const auto b = toy_set("b", {{"x", "F"}, {"y", "M"}, {"z", "F"}, {"w", "M"}});
  for (const auto& [_, cell] : transfer_eval({sm}, {a, b})) EXPECT_EQ(cell.metrics->balanced_accuracy, 0.5);
}

TEST(Transfer, MismatchedFeatureSpaceIsUnavailable) {
  auto sm = toy_model("base");
  FeaturizerConfig other;
  other.char_ngrams = {2, 2};
  sm.featurizer = toy_model("x", other).featurizer;
  const auto a = toy_set("a", {{"red", "F"}});
  try {
    predict_trace(sm, a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.reason(), "feature_space_mismatch");
  }
  const auto m = transfer_eval({sm}, {a});
  EXPECT_FALSE(m.begin()->second.metrics);
  EXPECT_FALSE(m.begin()->second.unavailable.empty());
}

TEST(Transfer, DenseModelsNeedMatchingEmbeddings) {
  EmbeddingTable table(2, "enc");
  table.add("a/0", {1.0f, 0.0f});
  table.add("a/1", {0.0f, 1.0f});
  TrainConfig c;
  c.epochs = 200;
  c.learning_rate = 0.5;
  ScoringModel sm;
  sm.model_id = "probe";
  sm.train_dataset = "a";
  sm.model = train_probe(table, {{"a/0", "F"}, {"a/1", "M"}}, c);
  auto ts = toy_set("a", {{"", "F"}, {"", "M"}});
  ts.embeddings = &table;
  EXPECT_EQ(compute_metrics(predict_trace(sm, ts)).balanced_accuracy, 1.0);
  EmbeddingTable other(2, "other-encoder");
  ts.embeddings = &other;
  EXPECT_THROW(predict_trace(sm, ts), Error);
  ts.embeddings = nullptr;
  EXPECT_THROW(predict_trace(sm, ts), Error);
}
