#pragma once

// Turning cleaned, labeled records into profiling examples: concatenation
// into chunks, class balancing, and recipient-grouped splitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "recipro/corpus.hpp"
#include "recipro/error.hpp"
#include "recipro/rng.hpp"
#include "recipro/text.hpp"

namespace recipro {

struct ProfilingExample {
  std::string example_id;
  std::string dataset_id;
  std::string recipient_id;
  std::string label;
  std::string text;
  std::vector<std::uint64_t> source_turns;
  std::size_t char_length = 0;

  bool operator==(const ProfilingExample&) const = default;
};

inline nlohmann::json to_json(const ProfilingExample& e) {
  return {{"example_id", e.example_id}, {"dataset_id", e.dataset_id},
          {"recipient_id", e.recipient_id}, {"label", e.label},
          {"text", e.text}, {"source_turns", e.source_turns},
          {"char_length", e.char_length}};
}

inline ProfilingExample example_from_json(const nlohmann::json& j) {
  ProfilingExample e;
  e.example_id = j.at("example_id").get<std::string>();
  e.dataset_id = j.at("dataset_id").get<std::string>();
  e.recipient_id = j.at("recipient_id").get<std::string>();
  e.label = j.at("label").get<std::string>();
  e.text = j.at("text").get<std::string>();
  e.source_turns = j.at("source_turns").get<std::vector<std::uint64_t>>();
  e.char_length = j.at("char_length").get<std::size_t>();
  return e;
}

inline void write_examples(const std::string& path, const std::vector<ProfilingExample>& examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw validation_error("unwritable_path", path);
  for (const auto& e : examples) out << to_json(e).dump() << '\n';
}

inline std::vector<ProfilingExample> read_examples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("unreadable_file", path);
  std::vector<ProfilingExample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(example_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw data_error("corrupt_examples", path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chunking

// Groups are always (dataset_id, conversation_id, author_id, recipient_id).
struct ChunkingConfig {
  std::size_t char_limit = 1000;
  std::string separator = " ";
  bool keep_short_tail = true;

  void validate() const {
    if (char_limit < 1) throw validation_error("invalid_chunking", "char_limit must be >= 1");
  }
};

// Greedy concatenation per directed group, in turn order. A chunk is closed
// as soon as its length reaches char_limit, so chunks may exceed the limit.
// Example ids are "<dataset>/<conversation>/<n>" with n counting chunks
// within the conversation in emission order.
inline std::vector<ProfilingExample> chunk_utterances(const std::vector<UtteranceRecord>& records,
                                                      const ChunkingConfig& cfg) {
  cfg.validate();
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::map<Key, std::size_t> group_index;
  std::vector<std::vector<const UtteranceRecord*>> groups;
  for (const auto& r : records) {
    Key key{r.dataset_id, r.conversation_id, r.author_id, r.recipient_id};
    auto [it, fresh] = group_index.emplace(std::move(key), groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(&r);
  }

  const std::size_t sep_len = text::char_length(cfg.separator);
  std::map<std::pair<std::string, std::string>, std::size_t> conversation_seq;
  std::vector<ProfilingExample> out;

  for (auto& group : groups) {
    std::stable_sort(group.begin(), group.end(),
                     [](const auto* a, const auto* b) { return a->turn_index < b->turn_index; });
    const auto& head = *group.front();
    if (!head.recipient_label) throw data_error("unlabeled_record", head.conversation_id);
    for (const auto* r : group)
      if (r->recipient_label != head.recipient_label)
        throw data_error("inconsistent_recipient_label", head.recipient_id);

    ProfilingExample open;
    auto emit = [&] {
      auto& seq = conversation_seq[{head.dataset_id, head.conversation_id}];
      open.example_id = head.dataset_id + "/" + head.conversation_id + "/" + std::to_string(seq++);
      open.dataset_id = head.dataset_id;
      open.recipient_id = head.recipient_id;
      open.label = *head.recipient_label;
      out.push_back(std::move(open));
      open = ProfilingExample{};
    };

    for (const auto* r : group) {
      if (!open.source_turns.empty()) {
        open.text += cfg.separator;
        open.char_length += sep_len;
      }
      open.text += r->text;
      open.char_length += text::char_length(r->text);
      open.source_turns.push_back(r->turn_index);
      if (open.char_length >= cfg.char_limit) emit();
    }
    if (!open.source_turns.empty() && cfg.keep_short_tail) emit();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Balancing

enum class BalanceLevel { utterance, recipient };

struct BalanceConfig {
  BalanceLevel level = BalanceLevel::utterance;
  std::uint64_t seed = 0;
};

inline const char* to_string(BalanceLevel l) {
  return l == BalanceLevel::utterance ? "utterance" : "recipient";
}

inline BalanceLevel parse_balance_level(const std::string& s) {
  if (s == "utterance") return BalanceLevel::utterance;
  if (s == "recipient") return BalanceLevel::recipient;
  throw validation_error("invalid_balance_level", s);
}

// Subsamples every over-represented class down to the smallest class count
// (examples at utterance level, recipients at recipient level). With more
// than two labels every class is cut to the minimum. Survivors keep their
// original order. `alphabet` lists labels that must be present; labels seen
// in the data are always included.
inline std::vector<ProfilingExample> balance_classes(const std::vector<ProfilingExample>& examples,
                                                     const BalanceConfig& cfg,
                                                     const std::set<std::string>& alphabet = {}) {
  std::map<std::string, std::vector<std::string>> units;  // label -> unit keys
  std::map<std::string, std::string> recipient_label;
  for (const auto& l : alphabet) units[l];
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    if (cfg.level == BalanceLevel::utterance) {
      units[e.label].push_back(std::to_string(i));
    } else {
      auto [it, fresh] = recipient_label.emplace(e.recipient_id, e.label);
      if (fresh)
        units[e.label].push_back(e.recipient_id);
      else if (it->second != e.label)
        throw data_error("inconsistent_recipient_label", e.recipient_id);
    }
  }
  if (units.size() < 2) throw data_error("degenerate_class", "fewer than two labels present");
  std::size_t target = SIZE_MAX;
  for (const auto& [label, u] : units) {
    if (u.empty()) throw data_error("degenerate_class", "label '" + label + "' has no examples");
    target = std::min(target, u.size());
  }

  Rng rng(derive_seed(cfg.seed, "balance"));
  std::set<std::string> keep;
  for (auto& [label, u] : units) {
    if (cfg.level == BalanceLevel::recipient) std::sort(u.begin(), u.end());
    if (u.size() > target) {
      shuffle(std::span<std::string>(u), rng);
      u.resize(target);
    }
    keep.insert(u.begin(), u.end());
  }

  std::vector<ProfilingExample> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& key = cfg.level == BalanceLevel::utterance ? std::to_string(i) : examples[i].recipient_id;
    if (keep.count(key)) out.push_back(examples[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

enum class Split { train = 0, val = 1, test = 2 };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

struct SplitConfig {
  double train_fraction = 0.80;
  double val_fraction = 0.04;
  double test_fraction = 0.16;
  std::uint64_t seed = 0;

  std::array<double, 3> fractions() const { return {train_fraction, val_fraction, test_fraction}; }

  void validate() const {
    for (double f : fractions())
      if (!(f >= 0.0 && f <= 1.0)) throw validation_error("invalid_split", "fraction outside [0,1]");
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
      throw validation_error("invalid_split", "fractions must sum to 1");
  }
};

// Largest-remainder apportionment of n recipients; remainder ties go to the
// earlier split. When n >= 3 an empty split then borrows one recipient from
// the split that is furthest above its exact quota.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions) {
  std::array<double, 3> quota{};
  std::array<std::size_t, 3> size{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    quota[i] = static_cast<double>(n) * fractions[i];
    // n * 0.16 and friends land a hair off the integer they denote.
    if (std::abs(quota[i] - std::round(quota[i])) < 1e-9) quota[i] = std::round(quota[i]);
    size[i] = static_cast<std::size_t>(std::floor(quota[i]));
    assigned += size[i];
  }
  // Remainders are compared on a 1e-9 grid so that equal rational
  // remainders tie (and go to the earlier split) despite rounding.
  std::array<double, 3> rem{};
  for (int i = 0; i < 3; ++i) rem[i] = std::round((quota[i] - std::floor(quota[i])) * 1e9);
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++size[order[k % 3]];
  if (n >= 3) {
    for (int i = 0; i < 3; ++i) {
      if (size[i] != 0) continue;
      int donor = -1;
      for (int d = 0; d < 3; ++d) {
        if (size[d] <= 1) continue;
        if (donor < 0 || static_cast<double>(size[d]) - quota[d] >
                             static_cast<double>(size[donor]) - quota[donor])
          donor = d;
      }
      --size[donor];
      ++size[i];
    }
  }
  return size;
}

using SplitAssignment = std::map<std::string, Split>;

struct SplitResult {
  SplitAssignment assignment;
  std::vector<ProfilingExample> train, val, test;

  std::vector<ProfilingExample>& part(Split s) {
    return s == Split::train ? train : s == Split::val ? val : test;
  }
  const std::vector<ProfilingExample>& part(Split s) const {
    return s == Split::train ? train : s == Split::val ? val : test;
  }
};

// Recipients are sorted, shuffled with the split seed, then cut by
// split_sizes. The assignment depends only on the recipient set, the seed
// and the fractions.
inline SplitResult split_by_recipient(const std::vector<ProfilingExample>& examples,
                                      const SplitConfig& cfg) {
  cfg.validate();
  std::set<std::string> distinct;
  for (const auto& e : examples) distinct.insert(e.recipient_id);
  if (distinct.size() < 3)
    throw data_error("too_few_groups", std::to_string(distinct.size()) + " recipients");

  std::vector<std::string> recipients(distinct.begin(), distinct.end());
  Rng rng(derive_seed(cfg.seed, "split"));
  shuffle(std::span<std::string>(recipients), rng);
  const auto sizes = split_sizes(recipients.size(), cfg.fractions());

  SplitResult result;
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t k = 0; k < sizes[s]; ++k) result.assignment[recipients[pos++]] = static_cast<Split>(s);
  for (const auto& e : examples) result.part(result.assignment.at(e.recipient_id)).push_back(e);
  return result;
}

struct SplitDiagnostics {
  std::vector<std::string> overlap;  // recipients present in more than one split
  std::vector<std::string> assignment_mismatches;  // example ids filed under the wrong split
  std::array<std::size_t, 3> recipients{};
  std::array<std::size_t, 3> examples{};
  std::array<std::map<std::string, std::size_t>, 3> label_mix;

  bool ok() const { return overlap.empty() && assignment_mismatches.empty(); }
};

inline SplitDiagnostics verify_split(const SplitAssignment& assignment,
                                     const std::vector<ProfilingExample>& train,
                                     const std::vector<ProfilingExample>& val,
                                     const std::vector<ProfilingExample>& test) {
  SplitDiagnostics d;
  std::map<std::string, std::set<int>> seen;
  const std::array<const std::vector<ProfilingExample>*, 3> parts{&train, &val, &test};
  for (int s = 0; s < 3; ++s) {
    std::set<std::string> here;
    for (const auto& e : *parts[s]) {
      here.insert(e.recipient_id);
      seen[e.recipient_id].insert(s);
      ++d.label_mix[s][e.label];
      auto it = assignment.find(e.recipient_id);
      if (it == assignment.end() || static_cast<int>(it->second) != s)
        d.assignment_mismatches.push_back(e.example_id);
    }
    d.recipients[s] = here.size();
    d.examples[s] = parts[s]->size();
  }
  for (const auto& [r, splits] : seen)
    if (splits.size() > 1) d.overlap.push_back(r);
  return d;
}

inline SplitDiagnostics verify_split(const SplitResult& r) {
  return verify_split(r.assignment, r.train, r.val, r.test);
}

inline nlohmann::json to_json(const SplitDiagnostics& d) {
  nlohmann::json j;
  j["overlap"] = d.overlap;
  j["assignment_mismatches"] = d.assignment_mismatches;
  for (int s = 0; s < 3; ++s) {
    auto& part = j["splits"][to_string(static_cast<Split>(s))];
    part["recipients"] = d.recipients[s];
    part["examples"] = d.examples[s];
    part["labels"] = d.label_mix[s];
  }
  return j;
}

inline nlohmann::json split_manifest(const SplitResult& r, const SplitConfig& cfg,
                                     const std::string& config_digest) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["fractions"] = {cfg.train_fraction, cfg.val_fraction, cfg.test_fraction};
  j["config_digest"] = config_digest;
  for (int s = 0; s < 3; ++s) j["recipients"][to_string(static_cast<Split>(s))] = nlohmann::json::array();
  for (const auto& [rid, s] : r.assignment) j["recipients"][to_string(s)].push_back(rid);
  return j;
}

}  // namespace recipro
