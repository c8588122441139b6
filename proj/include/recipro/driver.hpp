#pragma once

// Experiment lifecycle behind the `recipro` CLI.
//
// Each stage writes its outputs under the output root together with a
// manifest (manifests/<stage>.json) recording the digest of its inputs and
// the digest of every file it produced. A stage whose recorded input digest
// and outputs still match is skipped as up to date; a stage whose upstream
// manifest is missing, stale or tampered with refuses to run.
//
// Layout under the output root:
//   data/<ds>/records.jsonl, ingest_report.json, stats.csv, stats.txt,
//            train.jsonl, val.jsonl, test.jsonl, split_manifest.json,
//            prepare_summary.json
//   models/<model>/<ds>/seed-<n>/model.rpmod [featurizer.rpfeat]
//   traces/<model>/<ds>/seed-<n>.jsonl, eval/metrics.json
//   transfer/<model>/<train>/<eval>/seed-<n>.jsonl, transfer/transfer.json
//   agreement/agreement.json
//   report/tables/*.csv, report/charts/*.svg, report/summary.md
//   manifests/*.json, run_manifest.json

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "recipro/config.hpp"
#include "recipro/corpus.hpp"
#include "recipro/embeddings.hpp"
#include "recipro/error.hpp"
#include "recipro/eval.hpp"
#include "recipro/features.hpp"
#include "recipro/hash.hpp"
#include "recipro/model.hpp"
#include "recipro/pipeline.hpp"
#include "recipro/report.hpp"

namespace recipro {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

// RECIPRO_LOG=quiet|info|debug (default info).
inline LogLevel log_level_from_env() {
  const char* v = std::getenv("RECIPRO_LOG");
  if (!v) return LogLevel::info;
  const std::string s(v);
  if (s == "quiet" || s == "0") return LogLevel::quiet;
  if (s == "debug" || s == "2") return LogLevel::debug;
  return LogLevel::info;
}

class Logger {
 public:
  explicit Logger(LogLevel level = log_level_from_env(), std::ostream* out = &std::cerr) : level_(level), out_(out) {}
  void info(const std::string& msg) const { emit(LogLevel::info, msg); }
  void debug(const std::string& msg) const { emit(LogLevel::debug, msg); }
  void warn(const std::string& msg) const { emit(LogLevel::info, "warning: " + msg); }

 private:
  void emit(LogLevel at, const std::string& msg) const {
    if (static_cast<int>(level_) >= static_cast<int>(at)) *out_ << "[recipro] " << msg << '\n';
  }
  LogLevel level_;
  std::ostream* out_;
};

namespace driver_detail {

inline nlohmann::json to_json(const CorpusStats& s) {
  return {{"utterance_count", s.utterance_count},
          {"author_count", s.author_count},
          {"recipient_count", s.recipient_count},
          {"labeled_utterance_count", s.labeled_utterance_count},
          {"labeled_recipient_count", s.labeled_recipient_count},
          {"recipients_per_label", s.recipients_per_label},
          {"utterances_per_label", s.utterances_per_label},
          {"mean_chars", s.mean_chars},
          {"label_conflicts", s.label_conflicts}};
}

inline CorpusStats stats_from_json(const nlohmann::json& j) {
  CorpusStats s;
  s.utterance_count = j.at("utterance_count").get<std::size_t>();
  s.author_count = j.at("author_count").get<std::size_t>();
  s.recipient_count = j.at("recipient_count").get<std::size_t>();
  s.labeled_utterance_count = j.at("labeled_utterance_count").get<std::size_t>();
  s.labeled_recipient_count = j.at("labeled_recipient_count").get<std::size_t>();
  s.recipients_per_label = j.at("recipients_per_label").get<std::map<std::string, std::size_t>>();
  s.utterances_per_label = j.at("utterances_per_label").get<std::map<std::string, std::size_t>>();
  s.mean_chars = j.at("mean_chars").get<double>();
  s.label_conflicts = j.at("label_conflicts").get<std::size_t>();
  return s;
}

inline nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw data_error("unreadable_file", p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("corrupt_json", p.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& p, const nlohmann::json& j) {
  report_detail::write_text(p, j.dump(2) + "\n");
}

inline std::string stage_file(const std::string& key) {
  std::string s = key;
  for (auto& c : s)
    if (c == '/') c = '~';
  return s + ".json";
}

}  // namespace driver_detail

class Runner {
 public:
  explicit Runner(RunConfig cfg, Logger log = Logger()) : cfg_(std::move(cfg)), log_(std::move(log)) {
    validate(cfg_);
  }

  const RunConfig& config() const { return cfg_; }
  const fs::path& root() const { return cfg_.output_root; }

  // Keys of stages skipped as up to date during the last call.
  const std::vector<std::string>& skipped() const { return skipped_; }

  void ingest() {
    begin();
    for (const auto& d : cfg_.datasets) ingest_one(d);
  }
  void stats() {
    begin();
    for (const auto& d : cfg_.datasets) stats_one(d);
  }
  void prepare() {
    begin();
    for (const auto& d : cfg_.datasets) prepare_one(d);
  }
  void train() {
    begin();
    run_stage("train", [&] { return train_body(); });
  }
  void eval() {
    begin();
    run_stage("eval", [&] { return eval_body(); });
  }
  void transfer() {
    begin();
    run_stage("transfer", [&] { return transfer_body(); });
  }
  void agree() {
    begin();
    run_stage("agree", [&] { return agree_body(); });
  }
  void report() {
    begin();
    run_stage("report", [&] { return report_body(); });
  }

  void run_all() {
    begin();
    for (const auto& d : cfg_.datasets) ingest_one(d);
    for (const auto& d : cfg_.datasets) stats_one(d);
    for (const auto& d : cfg_.datasets) prepare_one(d);
    if (cfg_.models.empty()) return;
    run_stage("train", [&] { return train_body(); });
    run_stage("eval", [&] { return eval_body(); });
    run_stage("transfer", [&] { return transfer_body(); });
    run_stage("agree", [&] { return agree_body(); });
    run_stage("report", [&] { return report_body(); });
  }

 private:
  using Outputs = std::vector<std::string>;

  void begin() {
    skipped_.clear();
    fresh_cache_.clear();
  }

  // -------------------------------------------------------------------------
  // Manifests and digests

  fs::path manifest_path(const std::string& key) const {
    return root() / "manifests" / driver_detail::stage_file(key);
  }

  const std::string& digest_of(const fs::path& p) {
    auto key = p.string();
    auto it = file_digests_.find(key);
    if (it != file_digests_.end()) return it->second;
    return file_digests_[key] = file_digest(key);
  }

  const DatasetDecl& dataset(const std::string& id) const {
    for (const auto& d : cfg_.datasets)
      if (d.id == id) return d;
    throw validation_error("unknown_dataset", id);
  }

  std::string expected_input(const std::string& key) {
    Digest d;
    d.add(key);
    const auto slash = key.find('/');
    const std::string stage = key.substr(0, slash);
    if (stage == "ingest") {
      const auto& ds = dataset(key.substr(slash + 1));
      d.add(nlohmann::json(ds.label_alphabet).dump()).add(digest_of(ds.path));
    } else if (stage == "stats") {
      const auto& ds = dataset(key.substr(slash + 1));
      d.add(to_json(ds.cleaning).dump()).add(fresh("ingest/" + ds.id));
    } else if (stage == "prepare") {
      const auto& ds = dataset(key.substr(slash + 1));
      d.add(to_json(ds.cleaning).dump())
          .add(to_json(ds.chunking).dump())
          .add(to_json(ds.balance).dump())
          .add(to_json(ds.split).dump())
          .add(nlohmann::json(ds.label_alphabet).dump())
          .add(fresh("ingest/" + ds.id));
    } else if (stage == "train") {
      for (const auto& m : cfg_.models) {
        d.add(to_json(m).dump());
        for (const auto& [_, p] : m.embeddings) d.add(digest_of(p));
      }
      d.add(nlohmann::json(cfg_.seeds).dump());
      for (const auto& ds : cfg_.datasets) d.add(fresh("prepare/" + ds.id));
    } else if (stage == "eval") {
      for (const auto& ds : cfg_.datasets) d.add(ds.gap_classes.first).add(ds.gap_classes.second);
      d.add(fresh("train"));
    } else if (stage == "transfer") {
      d.add(fresh("train"));
    } else if (stage == "agree") {
      d.add(to_string(cfg_.kappa_mode)).add(fresh("eval"));
    } else if (stage == "report") {
      for (const auto& ds : cfg_.datasets) d.add(fresh("prepare/" + ds.id));
      d.add(fresh("eval")).add(fresh("transfer")).add(fresh("agree"));
    } else {
      throw Error(ErrorKind::internal, "unknown_stage", key);
    }
    return d.hex();
  }

  // Digest of a completed, current upstream stage. Throws stale_upstream
  // naming the stage when it is missing, out of date, or its outputs changed.
  std::string fresh(const std::string& key) {
    if (auto it = fresh_cache_.find(key); it != fresh_cache_.end()) return it->second;
    const auto path = manifest_path(key);
    if (!fs::exists(path)) throw validation_error("stale_upstream", key + " has not been run");
    const auto m = driver_detail::read_json(path);
    if (m.value("input_digest", "") != expected_input(key))
      throw validation_error("stale_upstream", key + " is out of date; re-run it");
    if (!outputs_intact(m)) throw validation_error("stale_upstream", key + " outputs were modified or removed");
    Digest d;
    d.add(key).add(m.at("input_digest").get<std::string>()).add(m.at("outputs").dump());
    return fresh_cache_[key] = d.hex();
  }

  bool outputs_intact(const nlohmann::json& manifest) {
    for (const auto& [rel, digest] : manifest.at("outputs").items()) {
      const auto p = root() / rel;
      if (!fs::exists(p)) return false;
      if (file_digest(p.string()) != digest.get<std::string>()) return false;
    }
    return true;
  }

  void run_stage(const std::string& key, const std::function<Outputs()>& body) {
    const std::string input = expected_input(key);
    const auto path = manifest_path(key);
    if (fs::exists(path)) {
      const auto m = driver_detail::read_json(path);
      if (m.value("input_digest", "") == input && outputs_intact(m)) {
        log_.info(key + ": up to date");
        skipped_.push_back(key);
        return;
      }
    }
    log_.info(key + ": running");
    // Drop the old manifest first so an interrupted run never looks complete.
    std::error_code ec;
    fs::remove(path, ec);
    const Outputs outputs = body();
    nlohmann::json m;
    m["stage"] = key;
    m["input_digest"] = input;
    m["outputs"] = nlohmann::json::object();
    for (const auto& rel : outputs) m["outputs"][rel] = file_digest((root() / rel).string());
    driver_detail::write_json(path, m);
    fresh_cache_.erase(key);
    write_run_manifest();
    log_.info(key + ": done (" + std::to_string(outputs.size()) + " files)");
  }

  void write_run_manifest() {
    nlohmann::json j;
    j["stages"] = nlohmann::json::object();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(root() / "manifests")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto m = driver_detail::read_json(f);
      j["stages"][m.at("stage").get<std::string>()] = {{"manifest", "manifests/" + f.filename().string()},
                                                      {"input_digest", m.at("input_digest")},
                                                      {"outputs", m.at("outputs")}};
    }
    driver_detail::write_json(root() / "run_manifest.json", j);
  }

  fs::path out(const std::string& rel) const {
    const auto p = root() / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    return p;
  }

  // -------------------------------------------------------------------------
  // Corpus stages

  std::vector<UtteranceRecord> load_records(const DatasetDecl& d) {
    std::ifstream in(root() / "data" / d.id / "records.jsonl", std::ios::binary);
    if (!in) throw data_error("unreadable_file", "records for " + d.id);
    std::vector<UtteranceRecord> records;
    auto report = ingest_stream(in, d.id, d.alphabet_set(), [&](UtteranceRecord r) { records.push_back(std::move(r)); });
    if (report.rejected_total() > 0) throw data_error("corrupt_records", d.id);
    return records;
  }

  void ingest_one(const DatasetDecl& d) {
    run_stage("ingest/" + d.id, [&]() -> Outputs {
      auto result = recipro::ingest(d.path.string(), d.id, d.alphabet_set());
      const std::string base = "data/" + d.id + "/";
      {
        std::ofstream o(out(base + "records.jsonl"), std::ios::binary | std::ios::trunc);
        for (const auto& r : result.records) o << recipro::to_json(r).dump() << '\n';
      }
      driver_detail::write_json(out(base + "ingest_report.json"), recipro::to_json(result.report));
      log_.info(d.id + ": " + std::to_string(result.report.accepted) + " records accepted, " +
                std::to_string(result.report.rejected_total()) + " rejected of " +
                std::to_string(result.report.total_lines) + " lines");
      for (const auto& [reason, n] : result.report.rejected) log_.info("  rejected " + reason + ": " + std::to_string(n));
      return {base + "records.jsonl", base + "ingest_report.json"};
    });
  }

  void stats_one(const DatasetDecl& d) {
    run_stage("stats/" + d.id, [&]() -> Outputs {
      auto records = load_records(d);
      const auto raw = corpus_stats(records);
      const auto labeled = corpus_stats(filter_labeled(clean_records(std::move(records), TextCleaner(d.cleaning))));
      const std::string base = "data/" + d.id + "/";
      std::string csv = "key,value\n";
      for (const auto& [k, v] : stats_rows(raw)) csv += "ingested." + k + "," + v + "\n";
      for (const auto& [k, v] : stats_rows(labeled)) csv += "labeled." + k + "," + v + "\n";
      report_detail::write_text(out(base + "stats.csv"), csv);
      report_detail::write_text(out(base + "stats.txt"), stats_text(raw, d.id + " (ingested)") + "\n" +
                                                             stats_text(labeled, d.id + " (cleaned, labeled)"));
      return {base + "stats.csv", base + "stats.txt"};
    });
  }

  void prepare_one(const DatasetDecl& d) {
    run_stage("prepare/" + d.id, [&]() -> Outputs {
      auto records = load_records(d);
      const auto ingested = corpus_stats(records);
      std::map<std::string, std::size_t> dropped;
      auto labeled = filter_labeled(clean_records(std::move(records), TextCleaner(d.cleaning), &dropped));
      const auto labeled_stats = corpus_stats(labeled);
      auto chunks = chunk_utterances(labeled, d.chunking);
      auto balanced = balance_classes(chunks, d.balance, d.alphabet_set());
      auto split = split_by_recipient(balanced, d.split);
      const auto diag = verify_split(split);
      if (!diag.ok())
        throw data_error("split_leakage", d.id + ": " + std::to_string(diag.overlap.size()) + " recipients overlap");

      const std::string base = "data/" + d.id + "/";
      write_examples(out(base + "train.jsonl").string(), split.train);
      write_examples(out(base + "val.jsonl").string(), split.val);
      write_examples(out(base + "test.jsonl").string(), split.test);
      const std::string config_digest = Digest().add(to_json(d).dump()).hex();
      driver_detail::write_json(out(base + "split_manifest.json"), split_manifest(split, d.split, config_digest));

      std::uint64_t chars = 0;
      std::map<std::string, std::set<std::string>> recipients_by_label;
      for (const auto& e : balanced) {
        chars += e.char_length;
        recipients_by_label[e.label].insert(e.recipient_id);
      }
      nlohmann::json summary;
      summary["dataset_id"] = d.id;
      summary["label_alphabet"] = d.label_alphabet;
      summary["ingested"] = driver_detail::to_json(ingested);
      summary["labeled"] = driver_detail::to_json(labeled_stats);
      summary["dropped"] = dropped;
      summary["chunks"] = chunks.size();
      summary["balanced_examples"] = balanced.size();
      summary["balanced_mean_chars"] =
          balanced.empty() ? 0.0 : static_cast<double>(chars) / static_cast<double>(balanced.size());
      for (const auto& [label, rs] : recipients_by_label) summary["balanced_recipients_per_label"][label] = rs.size();
      summary["verify_split"] = recipro::to_json(diag);
      summary["pipeline"] = to_json(d);
      driver_detail::write_json(out(base + "prepare_summary.json"), summary);

      log_.info(d.id + ": " + std::to_string(labeled.size()) + " labeled utterances -> " +
                std::to_string(chunks.size()) + " chunks -> " + std::to_string(balanced.size()) +
                " balanced; recipients train/val/test " + std::to_string(diag.recipients[0]) + "/" +
                std::to_string(diag.recipients[1]) + "/" + std::to_string(diag.recipients[2]));
      return {base + "train.jsonl", base + "val.jsonl", base + "test.jsonl", base + "split_manifest.json",
              base + "prepare_summary.json"};
    });
  }

  // -------------------------------------------------------------------------
  // Model stages

  std::vector<ProfilingExample> split_examples(const DatasetDecl& d, const char* part) {
    return read_examples((root() / "data" / d.id / (std::string(part) + ".jsonl")).string());
  }

  const EmbeddingTable& embeddings(const ModelDecl& m, const std::string& dataset_id) {
    const auto& path = m.embeddings.at(dataset_id);
    const auto key = path.string() + "\n" + m.source_model;
    auto it = embedding_cache_.find(key);
    if (it == embedding_cache_.end())
      it = embedding_cache_.emplace(key, std::make_unique<EmbeddingTable>(load_embeddings(path.string(), m.source_model)))
               .first;
    return *it->second;
  }

  static std::string cell_dir(const ModelDecl& m, const DatasetDecl& d, std::uint64_t seed) {
    return "models/" + m.id + "/" + d.id + "/seed-" + std::to_string(seed) + "/";
  }

  ScoringModel load_scoring_model(const ModelDecl& m, const DatasetDecl& d, std::uint64_t seed) {
    const auto dir = root() / cell_dir(m, d, seed);
    ScoringModel sm;
    sm.model_id = m.id;
    sm.train_dataset = d.id;
    sm.model = load_model((dir / "model.rpmod").string());
    if (m.kind == ModelKind::baseline) sm.featurizer = load_featurizer((dir / "featurizer.rpfeat").string());
    return sm;
  }

  TestSet test_set(const ModelDecl& m, const DatasetDecl& d) {
    TestSet ts;
    ts.dataset_id = d.id;
    ts.examples = split_examples(d, "test");
    if (m.kind == ModelKind::probe && m.embeddings.count(d.id)) ts.embeddings = &embeddings(m, d.id);
    return ts;
  }

  Outputs train_body() {
    Outputs outputs;
    for (const auto& m : cfg_.models) {
      for (const auto& d : cfg_.datasets) {
        const auto train_set = split_examples(d, "train");
        const auto& data_digest = digest_of(root() / "data" / d.id / "train.jsonl");
        std::vector<std::string> labels;
        for (const auto& e : train_set) labels.push_back(e.label);
        std::optional<FittedFeaturizer> featurizer;
        std::vector<SparseVector> sparse;
        if (m.kind == ModelKind::baseline) {
          std::vector<std::string> texts;
          for (const auto& e : train_set) texts.push_back(e.text);
          featurizer = fit(texts, m.featurizer);
          for (const auto& t : texts) sparse.push_back((*featurizer)(t));
        }
        for (const auto seed : cfg_.seeds) {
          TrainConfig tc = m.train;
          tc.seed = seed;
          LinearModel model;
          if (m.kind == ModelKind::baseline) {
            auto result = train_with_history(std::span<const SparseVector>(sparse), std::span<const std::string>(labels),
                                             FeatureSpace::hashed(m.featurizer), tc, data_digest);
            std::string losses;
            for (double l : result.epoch_loss) losses += " " + report_detail::fmt(l, 6);
            log_.debug(m.id + "/" + d.id + "/seed-" + std::to_string(seed) + " epoch loss:" + losses);
            model = std::move(result.model);
          } else {
            std::map<std::string, std::string> by_id;
            for (const auto& e : train_set) by_id[e.example_id] = e.label;
            model = train_probe(embeddings(m, d.id), by_id, tc);
          }
          const auto dir = cell_dir(m, d, seed);
          save_model(model, out(dir + "model.rpmod").string());
          outputs.push_back(dir + "model.rpmod");
          if (featurizer) {
            save_featurizer(*featurizer, out(dir + "featurizer.rpfeat").string());
            outputs.push_back(dir + "featurizer.rpfeat");
          }
        }
      }
    }
    return outputs;
  }

  Outputs eval_body() {
    Outputs outputs;
    nlohmann::json metrics = nlohmann::json::array(), gaps = nlohmann::json::array(),
                   gap_missing = nlohmann::json::array();
    for (const auto& m : cfg_.models) {
      for (const auto& d : cfg_.datasets) {
        const auto ts = test_set(m, d);
        for (const auto seed : cfg_.seeds) {
          const auto trace = predict_trace(load_scoring_model(m, d, seed), ts);
          const std::string rel = "traces/" + m.id + "/" + d.id + "/seed-" + std::to_string(seed) + ".jsonl";
          write_trace(out(rel).string(), trace);
          outputs.push_back(rel);
          const auto report = compute_metrics(trace);
          metrics.push_back({{"model_id", m.id}, {"dataset_id", d.id}, {"seed", seed}, {"metrics", to_json(report)}});
          try {
            const double gap = per_class_gap(trace, d.gap_classes.first, d.gap_classes.second);
            gaps.push_back({{"model_id", m.id}, {"dataset_id", d.id}, {"seed", seed},
                            {"class_a", d.gap_classes.first}, {"class_b", d.gap_classes.second}, {"gap", gap}});
          } catch (const Error& e) {
            log_.warn(m.id + "/" + d.id + "/seed-" + std::to_string(seed) + ": gap unavailable (" + e.what() + ")");
            gap_missing.push_back({{"model_id", m.id}, {"dataset_id", d.id}, {"seed", seed}, {"reason", e.what()}});
          }
          log_.info(m.id + "/" + d.id + "/seed-" + std::to_string(seed) +
                    ": balanced accuracy " + report_detail::fmt(report.balanced_accuracy, 4));
        }
      }
    }
    driver_detail::write_json(out("eval/metrics.json"),
                              {{"metrics", metrics}, {"gaps", gaps}, {"gaps_unavailable", gap_missing}});
    outputs.push_back("eval/metrics.json");
    return outputs;
  }

  Outputs transfer_body() {
    Outputs outputs;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& m : cfg_.models) {
      std::vector<TestSet> sets;
      for (const auto& d : cfg_.datasets) sets.push_back(test_set(m, d));
      for (const auto& d : cfg_.datasets) {
        for (const auto seed : cfg_.seeds) {
          const auto sm = load_scoring_model(m, d, seed);
          for (const auto& ts : sets) {
            nlohmann::json cell{{"model_id", m.id}, {"train_dataset", d.id}, {"eval_dataset", ts.dataset_id},
                                {"seed", seed}};
            try {
              const auto trace = predict_trace(sm, ts);
              const std::string rel = "transfer/" + m.id + "/" + d.id + "/" + ts.dataset_id + "/seed-" +
                                      std::to_string(seed) + ".jsonl";
              write_trace(out(rel).string(), trace);
              outputs.push_back(rel);
              cell["metrics"] = to_json(compute_metrics(trace));
            } catch (const Error& e) {
              cell["unavailable"] = e.what();
            }
            cells.push_back(std::move(cell));
          }
        }
      }
    }
    driver_detail::write_json(out("transfer/transfer.json"), {{"cells", cells}});
    outputs.push_back("transfer/transfer.json");
    return outputs;
  }

  Outputs agree_body() {
    nlohmann::json results = nlohmann::json::array();
    for (const auto& d : cfg_.datasets) {
      for (const auto seed : cfg_.seeds) {
        std::vector<PredictionTrace> traces;
        for (const auto& m : cfg_.models)
          traces.push_back(read_trace(
              (root() / "traces" / m.id / d.id / ("seed-" + std::to_string(seed) + ".jsonl")).string()));
        for (const auto& ti : traces)
          for (const auto& tj : traces)
            results.push_back({{"dataset_id", d.id}, {"seed", seed}, {"result", to_json(kappa(ti, tj, cfg_.kappa_mode))}});
      }
    }
    driver_detail::write_json(out("agreement/agreement.json"), {{"results", results}});
    return {"agreement/agreement.json"};
  }

  Outputs report_body() {
    RunArtifacts a;
    for (const auto& m : cfg_.models) a.model_order.push_back(m.id);
    for (const auto& d : cfg_.datasets) a.dataset_order.push_back(d.id);

    const auto ev = driver_detail::read_json(root() / "eval" / "metrics.json");
    for (const auto& j : ev.at("metrics"))
      a.metrics.push_back({j.at("model_id"), j.at("dataset_id"), j.at("seed"), metrics_from_json(j.at("metrics"))});
    for (const auto& j : ev.at("gaps"))
      a.gaps.push_back({j.at("model_id"), j.at("dataset_id"), j.at("seed"), j.at("class_a"), j.at("class_b"),
                        j.at("gap")});

    const auto tr = driver_detail::read_json(root() / "transfer" / "transfer.json");
    for (const auto& j : tr.at("cells")) {
      TransferRecord r{j.at("model_id"), j.at("train_dataset"), j.at("eval_dataset"), j.at("seed"), {}, {}};
      if (j.contains("metrics"))
        r.metrics = metrics_from_json(j.at("metrics"));
      else
        r.unavailable = j.value("unavailable", "");
      a.transfer.push_back(std::move(r));
    }

    const auto ag = driver_detail::read_json(root() / "agreement" / "agreement.json");
    for (const auto& j : ag.at("results")) {
      const auto& r = j.at("result");
      AgreementResult res;
      res.model_i = r.at("model_i");
      res.model_j = r.at("model_j");
      res.mode = parse_kappa_mode(r.at("mode"));
      res.observed = r.at("P");
      res.chance = r.at("R");
      if (r.at("kappa").is_number()) res.kappa = r.at("kappa").get<double>();
      a.agreement.push_back({j.at("dataset_id"), j.at("seed"), res});
    }

    for (const auto& d : cfg_.datasets) {
      const auto s = driver_detail::read_json(root() / "data" / d.id / "prepare_summary.json");
      DatasetSummary ds;
      ds.dataset_id = d.id;
      ds.label_alphabet = d.label_alphabet;
      ds.ingested = driver_detail::stats_from_json(s.at("ingested"));
      ds.labeled = driver_detail::stats_from_json(s.at("labeled"));
      ds.balanced_examples = s.at("balanced_examples");
      ds.balanced_mean_chars = s.at("balanced_mean_chars");
      ds.balanced_recipients_per_label =
          s.value("balanced_recipients_per_label", nlohmann::json::object()).get<std::map<std::string, std::size_t>>();
      const auto& splits = s.at("verify_split").at("splits");
      int k = 0;
      for (const char* part : {"train", "val", "test"}) {
        ds.split_recipients[k] = splits.at(part).at("recipients");
        ds.split_examples[k] = splits.at(part).at("examples");
        ++k;
      }
      a.datasets.push_back(std::move(ds));
    }

    Outputs outputs;
    for (const auto& rel : emit_report(a, root() / "report")) outputs.push_back("report/" + rel);
    return outputs;
  }

  RunConfig cfg_;
  Logger log_;
  std::vector<std::string> skipped_;
  std::map<std::string, std::string> fresh_cache_;
  std::map<std::string, std::string> file_digests_;  // inputs outside the output root
  std::map<std::string, std::unique_ptr<EmbeddingTable>> embedding_cache_;
};

// Maps an exception to the CLI exit code: 1 validation, 2 data, 3 internal.
inline int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return static_cast<int>(err->kind());
  return static_cast<int>(ErrorKind::internal);
}

}  // namespace recipro
