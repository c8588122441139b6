#pragma once

// Declarative run configuration (JSON). Relative paths resolve against the
// directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "recipro/corpus.hpp"
#include "recipro/error.hpp"
#include "recipro/eval.hpp"
#include "recipro/features.hpp"
#include "recipro/hash.hpp"
#include "recipro/model.hpp"
#include "recipro/pipeline.hpp"

namespace recipro {

namespace fs = std::filesystem;

struct DatasetDecl {
  std::string id;
  fs::path path;
  std::vector<std::string> label_alphabet;
  CleaningConfig cleaning;
  ChunkingConfig chunking;
  BalanceConfig balance;
  SplitConfig split;
  std::pair<std::string, std::string> gap_classes;  // defaults to the first two labels

  std::set<std::string> alphabet_set() const { return {label_alphabet.begin(), label_alphabet.end()}; }
};

enum class ModelKind { baseline, probe };

struct ModelDecl {
  std::string id;
  ModelKind kind = ModelKind::baseline;
  TrainConfig train;
  FeaturizerConfig featurizer;               // baseline
  std::string source_model;                  // probe
  std::map<std::string, fs::path> embeddings;  // probe: dataset id -> RPEMB1 file
};

struct RunConfig {
  fs::path base_dir;
  fs::path output_root;
  std::vector<DatasetDecl> datasets;
  std::vector<ModelDecl> models;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  KappaMode kappa_mode = KappaMode::correctness;
};

struct Overrides {
  std::optional<std::string> dataset;
  std::optional<std::string> model;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
};

namespace config_detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw validation_error("invalid_config", std::string("bad value for '") + key + "'");
  }
}

inline NgramRange range(const nlohmann::json& j, const char* key, NgramRange fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() || !(*it)[1].is_number_integer())
    throw validation_error("invalid_config", std::string(key) + " must be [low, high]");
  return {(*it)[0].get<int>(), (*it)[1].get<int>()};
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace config_detail

inline FeaturizerConfig parse_featurizer(const nlohmann::json& j, FeaturizerConfig c = {}) {
  using namespace config_detail;
  if (j.is_null()) return c;
  c.word_ngrams = range(j, "word_ngrams", c.word_ngrams);
  c.char_ngrams = range(j, "char_ngrams", c.char_ngrams);
  c.hash_dims = get_or<std::uint32_t>(j, "hash_dims", c.hash_dims);
  c.use_tfidf = get_or<bool>(j, "use_tfidf", c.use_tfidf);
  c.lowercase = get_or<bool>(j, "lowercase", c.lowercase);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const FeaturizerConfig& c) {
  return {{"word_ngrams", {c.word_ngrams.low, c.word_ngrams.high}},
          {"char_ngrams", {c.char_ngrams.low, c.char_ngrams.high}},
          {"hash_dims", c.hash_dims},
          {"use_tfidf", c.use_tfidf},
          {"lowercase", c.lowercase}};
}

inline TrainConfig parse_train(const nlohmann::json& j, TrainConfig c) {
  using namespace config_detail;
  if (j.is_null()) return c;
  c.learning_rate = get_or<double>(j, "learning_rate", c.learning_rate);
  c.epochs = get_or<std::uint32_t>(j, "epochs", c.epochs);
  c.l2_lambda = get_or<double>(j, "l2_lambda", c.l2_lambda);
  c.batch_size = get_or<std::uint32_t>(j, "batch_size", c.batch_size);
  c.optimizer = parse_optimizer(get_or<std::string>(j, "optimizer", to_string(c.optimizer)));
  c.validate();
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},          {"l2_lambda", c.l2_lambda},
          {"batch_size", c.batch_size},       {"optimizer", to_string(c.optimizer)}};
}

inline nlohmann::json to_json(const CleaningConfig& c) {
  return {{"strip_patterns", c.strip_patterns}, {"collapse_whitespace", c.collapse_whitespace},
          {"lowercase", c.lowercase}};
}

inline nlohmann::json to_json(const ChunkingConfig& c) {
  return {{"char_limit", c.char_limit}, {"separator", c.separator}, {"keep_short_tail", c.keep_short_tail},
          {"group_keys", {"dataset_id", "conversation_id", "author_id", "recipient_id"}},
          {"emission_rule", "emit_when_length_reaches_limit"}};
}

inline nlohmann::json to_json(const BalanceConfig& c) {
  return {{"level", to_string(c.level)}, {"seed", c.seed}, {"order", "balance_then_split"}};
}

inline nlohmann::json to_json(const SplitConfig& c) {
  return {{"train_fraction", c.train_fraction},
          {"val_fraction", c.val_fraction},
          {"test_fraction", c.test_fraction},
          {"seed", c.seed}};
}

inline nlohmann::json to_json(const DatasetDecl& d) {
  return {{"id", d.id},
          {"path", d.path.string()},
          {"label_alphabet", d.label_alphabet},
          {"cleaning", to_json(d.cleaning)},
          {"chunking", to_json(d.chunking)},
          {"balance", to_json(d.balance)},
          {"split", to_json(d.split)},
          {"gap_classes", {d.gap_classes.first, d.gap_classes.second}}};
}

inline nlohmann::json to_json(const ModelDecl& m) {
  nlohmann::json j{{"id", m.id}, {"kind", m.kind == ModelKind::baseline ? "baseline" : "probe"},
                   {"train", to_json(m.train)}};
  if (m.kind == ModelKind::baseline) {
    j["featurizer"] = to_json(m.featurizer);
  } else {
    j["source_model"] = m.source_model;
    for (const auto& [ds, p] : m.embeddings) j["embeddings"][ds] = p.string();
  }
  return j;
}

inline RunConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
  using namespace config_detail;
  if (!j.is_object()) throw validation_error("invalid_config", "top level must be an object");
  RunConfig cfg;
  cfg.base_dir = base_dir;
  cfg.output_root = resolve(base_dir, get_or<std::string>(j, "output_root", "out"));
  cfg.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", cfg.seeds);
  cfg.kappa_mode = parse_kappa_mode(get_or<std::string>(j, "kappa_mode", "correctness"));
  const auto featurizer_defaults = parse_featurizer(j.value("featurizer", nlohmann::json()));

  for (const auto& dj : j.value("datasets", nlohmann::json::array())) {
    DatasetDecl d;
    d.id = get_or<std::string>(dj, "id", "");
    d.path = resolve(base_dir, get_or<std::string>(dj, "path", ""));
    d.label_alphabet = get_or<std::vector<std::string>>(dj, "label_alphabet", {});
    if (auto c = dj.value("cleaning", nlohmann::json()); !c.is_null()) {
      d.cleaning.strip_patterns = get_or(c, "strip_patterns", d.cleaning.strip_patterns);
      d.cleaning.collapse_whitespace = get_or(c, "collapse_whitespace", d.cleaning.collapse_whitespace);
      d.cleaning.lowercase = get_or(c, "lowercase", d.cleaning.lowercase);
    }
    if (auto c = dj.value("chunking", nlohmann::json()); !c.is_null()) {
      d.chunking.char_limit = get_or<std::size_t>(c, "char_limit", d.chunking.char_limit);
      d.chunking.separator = get_or(c, "separator", d.chunking.separator);
      d.chunking.keep_short_tail = get_or(c, "keep_short_tail", d.chunking.keep_short_tail);
    }
    if (auto c = dj.value("balance", nlohmann::json()); !c.is_null()) {
      d.balance.level = parse_balance_level(get_or<std::string>(c, "level", "utterance"));
      d.balance.seed = get_or<std::uint64_t>(c, "seed", d.balance.seed);
    }
    if (auto c = dj.value("split", nlohmann::json()); !c.is_null()) {
      d.split.train_fraction = get_or(c, "train_fraction", d.split.train_fraction);
      d.split.val_fraction = get_or(c, "val_fraction", d.split.val_fraction);
      d.split.test_fraction = get_or(c, "test_fraction", d.split.test_fraction);
      d.split.seed = get_or<std::uint64_t>(c, "seed", d.split.seed);
    }
    auto gap = get_or<std::vector<std::string>>(dj, "gap_classes", {});
    if (gap.empty() && d.label_alphabet.size() >= 2) gap = {d.label_alphabet[0], d.label_alphabet[1]};
    if (gap.size() == 2) d.gap_classes = {gap[0], gap[1]};
    cfg.datasets.push_back(std::move(d));
  }

  for (const auto& mj : j.value("models", nlohmann::json::array())) {
    ModelDecl m;
    m.id = get_or<std::string>(mj, "id", "");
    const auto kind = get_or<std::string>(mj, "kind", "baseline");
    if (kind == "baseline") {
      m.kind = ModelKind::baseline;
      m.train = parse_train(mj.value("train", nlohmann::json()), TrainConfig::sparse_defaults());
      m.featurizer = parse_featurizer(mj.value("featurizer", nlohmann::json()), featurizer_defaults);
    } else if (kind == "probe") {
      m.kind = ModelKind::probe;
      m.train = parse_train(mj.value("train", nlohmann::json()), TrainConfig::dense_defaults());
      m.source_model = get_or<std::string>(mj, "source_model", "");
      for (const auto& [ds, p] : mj.value("embeddings", nlohmann::json::object()).items())
        m.embeddings[ds] = resolve(base_dir, p.get<std::string>());
    } else {
      throw validation_error("invalid_config", "model kind must be baseline or probe: " + kind);
    }
    cfg.models.push_back(std::move(m));
  }
  return cfg;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("unreadable_config", path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error("invalid_config", e.what());
  }
  return parse_config(j, fs::absolute(path).parent_path());
}

inline void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.dataset) {
    std::erase_if(cfg.datasets, [&](const DatasetDecl& d) { return d.id != *o.dataset; });
    if (cfg.datasets.empty()) throw validation_error("unknown_dataset", *o.dataset);
  }
  if (o.model) {
    std::erase_if(cfg.models, [&](const ModelDecl& m) { return m.id != *o.model; });
    if (cfg.models.empty()) throw validation_error("unknown_model", *o.model);
  }
  if (o.seed) cfg.seeds = {*o.seed};
  if (o.out) cfg.output_root = o.out->is_absolute() ? *o.out : fs::absolute(*o.out);
}

inline void validate(const RunConfig& cfg) {
  if (cfg.seeds.empty()) throw validation_error("invalid_config", "seeds must be non-empty");
  if (cfg.datasets.empty()) throw validation_error("invalid_config", "no datasets declared");
  std::set<std::string> ids;
  for (const auto& d : cfg.datasets) {
    if (d.id.empty() || d.id.find_first_of("/\\") != std::string::npos || d.id == "." || d.id == "..")
      throw validation_error("invalid_config", "bad dataset id '" + d.id + "'");
    if (!ids.insert(d.id).second) throw validation_error("invalid_config", "duplicate dataset id " + d.id);
    if (!fs::exists(d.path)) throw validation_error("missing_path", d.path.string());
    if (d.label_alphabet.size() < 2)
      throw validation_error("invalid_config", d.id + ": label_alphabet needs at least two labels");
    const auto alphabet = d.alphabet_set();
    if (!alphabet.count(d.gap_classes.first) || !alphabet.count(d.gap_classes.second))
      throw validation_error("invalid_config", d.id + ": gap_classes must come from label_alphabet");
    (void)TextCleaner(d.cleaning);
    d.chunking.validate();
    d.split.validate();
  }
  std::set<std::string> model_ids;
  for (const auto& m : cfg.models) {
    if (m.id.empty() || m.id.find_first_of("/\\") != std::string::npos || m.id == "." || m.id == "..")
      throw validation_error("invalid_config", "bad model id '" + m.id + "'");
    if (!model_ids.insert(m.id).second) throw validation_error("invalid_config", "duplicate model id " + m.id);
    if (m.kind == ModelKind::probe) {
      if (m.source_model.empty()) throw validation_error("invalid_config", m.id + ": probe needs source_model");
      for (const auto& d : cfg.datasets) {
        auto it = m.embeddings.find(d.id);
        if (it == m.embeddings.end())
          throw validation_error("invalid_config", m.id + ": no embedding file for dataset " + d.id);
        if (!fs::exists(it->second)) throw validation_error("missing_path", it->second.string());
      }
    }
  }
}

}  // namespace recipro
