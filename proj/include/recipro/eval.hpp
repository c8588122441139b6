#pragma once

// Evaluation over prediction traces: confusion-matrix metrics, per-class
// recall gap, cross-dataset transfer, and Cohen-style kappa agreement.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "recipro/embeddings.hpp"
#include "recipro/error.hpp"
#include "recipro/features.hpp"
#include "recipro/model.hpp"
#include "recipro/pipeline.hpp"

namespace recipro {

struct TraceEntry {
  std::string example_id;
  std::string truth;
  std::string predicted;
  double score = 0.0;
  bool operator==(const TraceEntry&) const = default;
};

struct PredictionTrace {
  std::string model_id;
  std::string dataset_id;
  std::vector<TraceEntry> entries;

  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries)
      if (!seen.insert(e.example_id).second) throw data_error("duplicate_example_id", e.example_id);
  }
  bool operator==(const PredictionTrace&) const = default;
};

// ---------------------------------------------------------------------------
// Trace files: one JSON object per line with model_id, dataset_id,
// example_id, truth, predicted, score.

inline void write_trace(const std::string& path, const PredictionTrace& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw validation_error("unwritable_path", path);
  for (const auto& e : t.entries) {
    nlohmann::json j{{"model_id", t.model_id}, {"dataset_id", t.dataset_id},
                     {"example_id", e.example_id}, {"truth", e.truth},
                     {"predicted", e.predicted}, {"score", e.score}};
    out << j.dump() << '\n';
  }
}

inline PredictionTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("unreadable_file", path);
  PredictionTrace t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (first) {
        t.model_id = j.at("model_id").get<std::string>();
        t.dataset_id = j.at("dataset_id").get<std::string>();
        first = false;
      }
      t.entries.push_back({j.at("example_id").get<std::string>(), j.at("truth").get<std::string>(),
                           j.at("predicted").get<std::string>(), j.at("score").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw data_error("corrupt_trace", path + ": " + e.what());
    }
  }
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Confusion matrix and metrics

struct ConfusionMatrix {
  std::vector<std::string> labels;    // sorted
  std::vector<std::uint64_t> counts;  // row = truth, column = predicted

  std::size_t index(const std::string& label) const {
    return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), label) - labels.begin());
  }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * labels.size() + pred]; }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
};

// Labels are the union of `alphabet`, truths and predictions.
inline ConfusionMatrix confusion_matrix(const PredictionTrace& t, const std::set<std::string>& alphabet = {}) {
  std::set<std::string> labels = alphabet;
  for (const auto& e : t.entries) {
    labels.insert(e.truth);
    labels.insert(e.predicted);
  }
  ConfusionMatrix cm;
  cm.labels.assign(labels.begin(), labels.end());
  cm.counts.assign(cm.labels.size() * cm.labels.size(), 0);
  for (const auto& e : t.entries) ++cm.counts[cm.index(e.truth) * cm.labels.size() + cm.index(e.predicted)];
  return cm;
}

struct MetricsReport {
  double balanced_accuracy = 0.0;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // Only labels that occur as truth.
  std::map<std::string, double> per_class_recall;

  bool operator==(const MetricsReport&) const = default;
};

// Per-class quantities are integer ratios with 0/0 taken as 0. Balanced
// accuracy averages recall over labels that occur as truth; the macro
// averages run over every label in the matrix, so a label that is only ever
// predicted contributes recall 0 to macro_recall but nothing to balanced
// accuracy.
inline MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
  const std::size_t k = cm.labels.size();
  auto ratio = [](std::uint64_t a, std::uint64_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  MetricsReport m;
  std::uint64_t correct = 0;
  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t support = 0, predicted = 0;
    for (std::size_t o = 0; o < k; ++o) {
      support += cm.at(c, o);
      predicted += cm.at(o, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    correct += tp;
    const std::uint64_t fp = predicted - tp, fn = support - tp;
    sum_p += ratio(tp, predicted);
    sum_r += ratio(tp, support);
    sum_f += ratio(2 * tp, 2 * tp + fp + fn);
    if (support > 0) m.per_class_recall[cm.labels[c]] = ratio(tp, support);
  }
  double bal = 0.0;
  for (const auto& [_, r] : m.per_class_recall) bal += r;
  m.balanced_accuracy = bal / static_cast<double>(m.per_class_recall.size());
  m.accuracy = ratio(correct, cm.total());
  m.macro_precision = sum_p / static_cast<double>(k);
  m.macro_recall = sum_r / static_cast<double>(k);
  m.macro_f1 = sum_f / static_cast<double>(k);
  return m;
}

inline MetricsReport compute_metrics(const PredictionTrace& t) {
  if (t.entries.empty()) throw data_error("empty_trace", t.model_id + "/" + t.dataset_id);
  return metrics_from_confusion(confusion_matrix(t));
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"balanced_accuracy", m.balanced_accuracy}, {"accuracy", m.accuracy},
          {"macro_precision", m.macro_precision},     {"macro_recall", m.macro_recall},
          {"macro_f1", m.macro_f1},                   {"per_class_recall", m.per_class_recall}};
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.balanced_accuracy = j.at("balanced_accuracy").get<double>();
  m.accuracy = j.at("accuracy").get<double>();
  m.macro_precision = j.at("macro_precision").get<double>();
  m.macro_recall = j.at("macro_recall").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.per_class_recall = j.at("per_class_recall").get<std::map<std::string, double>>();
  return m;
}

// recall(class_a) - recall(class_b), as a fraction (reports multiply by 100).
inline double per_class_gap(const PredictionTrace& t, const std::string& class_a, const std::string& class_b) {
  const auto m = compute_metrics(t);
  auto a = m.per_class_recall.find(class_a);
  auto b = m.per_class_recall.find(class_b);
  if (a == m.per_class_recall.end()) throw data_error("absent_class", class_a);
  if (b == m.per_class_recall.end()) throw data_error("absent_class", class_b);
  return a->second - b->second;
}

// ---------------------------------------------------------------------------
// Seed aggregation

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
  std::size_t n = 0;
};

inline Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Agreement

enum class KappaMode { correctness, labels };

inline const char* to_string(KappaMode m) { return m == KappaMode::correctness ? "correctness" : "labels"; }

inline KappaMode parse_kappa_mode(const std::string& s) {
  if (s == "correctness") return KappaMode::correctness;
  if (s == "labels") return KappaMode::labels;
  throw validation_error("invalid_kappa_mode", s);
}

struct AgreementResult {
  std::string model_i;
  std::string model_j;
  KappaMode mode = KappaMode::correctness;
  double observed = 0.0;  // P
  double chance = 0.0;    // R
  std::optional<double> kappa;  // empty when R = 1

  bool degenerate() const { return !kappa.has_value(); }
};

// kappa = (P - R) / (1 - R), evaluated as
// (n * agree - S) / (n^2 - S) with S = n^2 R an exact integer, so the result
// is symmetric in (i, j) and exactly 1 for identical non-degenerate traces.
inline AgreementResult kappa(const PredictionTrace& ti, const PredictionTrace& tj,
                             KappaMode mode = KappaMode::correctness) {
  std::unordered_map<std::string, const TraceEntry*> by_id;
  for (const auto& e : tj.entries) by_id.emplace(e.example_id, &e);
  if (by_id.size() != ti.entries.size() || tj.entries.size() != ti.entries.size())
    throw data_error("example_set_mismatch", ti.model_id + " vs " + tj.model_id);
  if (ti.entries.empty()) throw data_error("empty_trace", ti.model_id);

  std::int64_t agree = 0;
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> marginal;  // category -> (count_i, count_j)
  for (const auto& ei : ti.entries) {
    auto it = by_id.find(ei.example_id);
    if (it == by_id.end()) throw data_error("example_set_mismatch", ei.example_id);
    const auto& ej = *it->second;
    std::string ci, cj;
    if (mode == KappaMode::correctness) {
      ci = ei.truth == ei.predicted ? "correct" : "incorrect";
      cj = ej.truth == ej.predicted ? "correct" : "incorrect";
    } else {
      ci = ei.predicted;
      cj = ej.predicted;
    }
    if (ci == cj) ++agree;
    ++marginal[ci].first;
    ++marginal[cj].second;
  }
  const auto n = static_cast<std::int64_t>(ti.entries.size());
  std::int64_t s = 0;
  for (const auto& [_, c] : marginal) s += c.first * c.second;

  AgreementResult r;
  r.model_i = ti.model_id;
  r.model_j = tj.model_id;
  r.mode = mode;
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  r.observed = static_cast<double>(agree) / static_cast<double>(n);
  r.chance = static_cast<double>(s) / n2;
  const std::int64_t den = n * n - s;
  if (den != 0) r.kappa = static_cast<double>(n * agree - s) / static_cast<double>(den);
  return r;
}

inline nlohmann::json to_json(const AgreementResult& a) {
  nlohmann::json j{{"model_i", a.model_i}, {"model_j", a.model_j}, {"mode", to_string(a.mode)},
                   {"P", a.observed},      {"R", a.chance}};
  if (a.kappa)
    j["kappa"] = *a.kappa;
  else
    j["kappa"] = "degenerate";
  return j;
}

// ---------------------------------------------------------------------------
// Prediction and transfer

// A trained model plus whatever it needs to featurize text.
struct ScoringModel {
  std::string model_id;
  std::string train_dataset;
  LinearModel model;
  std::optional<FittedFeaturizer> featurizer;  // hashed models
};

struct TestSet {
  std::string dataset_id;
  std::vector<ProfilingExample> examples;
  const EmbeddingTable* embeddings = nullptr;  // dense models
};

// Throws data_error("feature_space_mismatch") when the model cannot be
// applied to this dataset.
inline PredictionTrace predict_trace(const ScoringModel& sm, const TestSet& ts) {
  PredictionTrace t;
  t.model_id = sm.model_id;
  t.dataset_id = ts.dataset_id;
  t.entries.reserve(ts.examples.size());
  const auto& space = sm.model.space;
  if (space.kind == FeatureSpace::Kind::hashed) {
    if (!sm.featurizer || sm.featurizer->config().digest() != space.tag)
      throw data_error("feature_space_mismatch", sm.model_id + ": featurizer does not match model");
    for (const auto& e : ts.examples) {
      const auto p = predict(sm.model, (*sm.featurizer)(e.text));
      t.entries.push_back({e.example_id, e.label, p.label, p.score});
    }
  } else {
    if (!ts.embeddings || ts.embeddings->dim() != space.dim || ts.embeddings->source_model() != space.tag)
      throw data_error("feature_space_mismatch",
                       sm.model_id + ": no '" + space.tag + "' embeddings for " + ts.dataset_id);
    for (const auto& e : ts.examples) {
      const auto* v = ts.embeddings->find(e.example_id);
      if (!v) throw data_error("missing_embedding", e.example_id);
      const auto p = predict(sm.model, to_dense(*v));
      t.entries.push_back({e.example_id, e.label, p.label, p.score});
    }
  }
  return t;
}

struct TransferKey {
  std::string model_id;
  std::string train_dataset;
  std::string eval_dataset;
  auto operator<=>(const TransferKey&) const = default;
};

struct TransferCell {
  std::optional<MetricsReport> metrics;
  std::string unavailable;  // reason when metrics is empty
};

using TransferMatrix = std::map<TransferKey, TransferCell>;

// Every model on every dataset; failing cells are marked unavailable rather
// than aborting the matrix.
inline TransferMatrix transfer_eval(const std::vector<ScoringModel>& models, const std::vector<TestSet>& datasets) {
  TransferMatrix out;
  for (const auto& m : models) {
    for (const auto& d : datasets) {
      TransferCell cell;
      try {
        cell.metrics = compute_metrics(predict_trace(m, d));
      } catch (const Error& e) {
        cell.unavailable = e.what();
      }
      out[{m.model_id, m.train_dataset, d.dataset_id}] = std::move(cell);
    }
  }
  return out;
}

}  // namespace recipro
