#pragma once

// Canonical conversation records: ingestion, cleaning, label filtering and
// dataset statistics.

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "recipro/error.hpp"
#include "recipro/text.hpp"

namespace recipro {

// One directed message author -> recipient.
struct UtteranceRecord {
  std::string dataset_id;
  std::string conversation_id;
  std::uint64_t turn_index = 0;
  std::string author_id;
  std::string recipient_id;
  std::string text;
  std::optional<std::string> recipient_label;
  std::optional<std::string> author_label;

  bool operator==(const UtteranceRecord&) const = default;
};

inline nlohmann::json to_json(const UtteranceRecord& r) {
  nlohmann::json j;
  j["dataset_id"] = r.dataset_id;
  j["conversation_id"] = r.conversation_id;
  j["turn_index"] = r.turn_index;
  j["author_id"] = r.author_id;
  j["recipient_id"] = r.recipient_id;
  j["text"] = r.text;
  if (r.recipient_label) j["recipient_label"] = *r.recipient_label;
  if (r.author_label) j["author_label"] = *r.author_label;
  return j;
}

// ---------------------------------------------------------------------------
// Cleaning

// strip_patterns use ECMAScript regular-expression syntax. Each pattern is
// deleted repeatedly until no match remains, so nested annotations such as
// "{a {b} c}" disappear completely. A pattern that matches the empty string
// is rejected.
struct CleaningConfig {
  std::vector<std::string> strip_patterns = default_strip_patterns();
  bool collapse_whitespace = true;
  bool lowercase = false;

  static std::vector<std::string> default_strip_patterns() {
    return {R"(\{[^{}]*\})", R"(<[^<>]*>)", R"(\[[^\[\]]*\])"};
  }
};

class TextCleaner {
 public:
  explicit TextCleaner(CleaningConfig cfg = {}) : cfg_(std::move(cfg)) {
    for (const auto& p : cfg_.strip_patterns) {
      std::regex re;
      try {
        re = std::regex(p, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw validation_error("invalid_pattern", p + " (" + e.what() + ")");
      }
      if (std::regex_search(std::string(), re))
        throw validation_error("invalid_pattern", p + " matches the empty string");
      patterns_.push_back(std::move(re));
    }
  }

  std::string operator()(std::string_view input) const {
    std::string cur(input);
    // Every step is length non-increasing, so this reaches a fixpoint.
    for (;;) {
      std::string next = pass(cur);
      if (next == cur) return next;
      cur = std::move(next);
    }
  }

  const CleaningConfig& config() const { return cfg_; }

 private:
  std::string pass(const std::string& in) const {
    std::string s = cfg_.lowercase ? text::ascii_lower(in) : in;
    for (const auto& re : patterns_) {
      for (;;) {
        std::string next = std::regex_replace(s, re, "");
        if (next == s) break;
        s = std::move(next);
      }
    }
    if (cfg_.collapse_whitespace) s = text::collapse_whitespace(s);
    return std::string(text::trim(s));
  }

  CleaningConfig cfg_;
  std::vector<std::regex> patterns_;
};

inline std::string clean_text(std::string_view text, const CleaningConfig& cfg = {}) {
  return TextCleaner(cfg)(text);
}

// ---------------------------------------------------------------------------
// Ingestion

struct IngestReport {
  std::size_t total_lines = 0;
  std::size_t accepted = 0;
  std::map<std::string, std::size_t> rejected;  // reason -> count
  std::vector<std::pair<std::size_t, std::string>> samples;  // first rejections (line no, reason)

  std::size_t rejected_total() const {
    std::size_t n = 0;
    for (const auto& [_, c] : rejected) n += c;
    return n;
  }

  void reject(std::size_t line_no, const std::string& reason) {
    ++rejected[reason];
    if (samples.size() < 100) samples.emplace_back(line_no, reason);
  }
};

inline nlohmann::json to_json(const IngestReport& r) {
  nlohmann::json j;
  j["total_lines"] = r.total_lines;
  j["accepted"] = r.accepted;
  j["rejected"] = r.rejected;
  auto& s = j["samples"] = nlohmann::json::array();
  for (const auto& [line, reason] : r.samples) s.push_back({{"line", line}, {"reason", reason}});
  return j;
}

struct IngestResult {
  std::vector<UtteranceRecord> records;
  IngestReport report;
};

namespace detail {

// Returns the rejection reason, or empty on success.
inline std::string parse_record(std::string_view line, const std::string& dataset_id,
                                const std::set<std::string>& alphabet, UtteranceRecord& out) {
  auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return "malformed_json";

  auto get_string = [&](const char* key, std::string& dst) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) return std::string("missing_field:") + key;
    if (!it->is_string()) return std::string("invalid_field:") + key;
    dst = it->get<std::string>();
    return {};
  };
  auto get_optional = [&](const char* key, std::optional<std::string>& dst) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) return {};
    if (!it->is_string()) return std::string("invalid_field:") + key;
    dst = it->get<std::string>();
    return {};
  };

  out = UtteranceRecord{};
  out.dataset_id = dataset_id;
  if (auto it = j.find("dataset_id"); it != j.end()) {
    if (!it->is_string()) return "invalid_field:dataset_id";
    if (it->get<std::string>() != dataset_id) return "dataset_mismatch";
  }
  if (auto e = get_string("conversation_id", out.conversation_id); !e.empty()) return e;
  {
    auto it = j.find("turn_index");
    if (it == j.end()) return "missing_field:turn_index";
    if (!it->is_number_unsigned()) return "invalid_field:turn_index";
    out.turn_index = it->get<std::uint64_t>();
  }
  if (auto e = get_string("author_id", out.author_id); !e.empty()) return e;
  if (auto e = get_string("recipient_id", out.recipient_id); !e.empty()) return e;
  if (auto e = get_string("text", out.text); !e.empty()) return e;
  if (auto e = get_optional("recipient_label", out.recipient_label); !e.empty()) return e;
  if (auto e = get_optional("author_label", out.author_label); !e.empty()) return e;
  if (out.recipient_label && !alphabet.count(*out.recipient_label)) return "label_out_of_alphabet";
  return {};
}

}  // namespace detail

// Parses canonical line-delimited records. Lines are processed in order and
// every line is either accepted or rejected with a counted reason.
template <typename Sink>
IngestReport ingest_stream(std::istream& in, const std::string& dataset_id,
                           const std::set<std::string>& label_alphabet, Sink&& sink) {
  if (label_alphabet.empty()) throw validation_error("empty_label_alphabet", dataset_id);
  IngestReport report;
  std::set<std::pair<std::string, std::uint64_t>> seen_turns;
  std::string line;
  while (std::getline(in, line)) {
    ++report.total_lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) {
      report.reject(report.total_lines, "blank_line");
      continue;
    }
    UtteranceRecord rec;
    std::string reason = detail::parse_record(line, dataset_id, label_alphabet, rec);
    if (reason.empty() && !seen_turns.emplace(rec.conversation_id, rec.turn_index).second)
      reason = "duplicate_turn_index";
    if (!reason.empty()) {
      report.reject(report.total_lines, reason);
      continue;
    }
    ++report.accepted;
    sink(std::move(rec));
  }
  if (in.bad()) throw data_error("unreadable_file", dataset_id);
  return report;
}

inline IngestResult ingest(const std::string& path, const std::string& dataset_id,
                           const std::set<std::string>& label_alphabet) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("unreadable_file", path);
  IngestResult result;
  result.report = ingest_stream(in, dataset_id, label_alphabet,
                                [&](UtteranceRecord r) { result.records.push_back(std::move(r)); });
  return result;
}

// Cleans every record in place order-preservingly; records whose text is empty
// afterwards are dropped and counted under "empty_after_cleaning".
inline std::vector<UtteranceRecord> clean_records(std::vector<UtteranceRecord> records,
                                                  const TextCleaner& cleaner,
                                                  std::map<std::string, std::size_t>* dropped = nullptr) {
  std::vector<UtteranceRecord> out;
  out.reserve(records.size());
  for (auto& r : records) {
    r.text = cleaner(r.text);
    if (r.text.empty()) {
      if (dropped) ++(*dropped)["empty_after_cleaning"];
      continue;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<UtteranceRecord> filter_labeled(std::vector<UtteranceRecord> records) {
  std::erase_if(records, [](const UtteranceRecord& r) { return !r.recipient_label.has_value(); });
  return records;
}

// ---------------------------------------------------------------------------
// Statistics

struct CorpusStats {
  std::size_t utterance_count = 0;
  std::size_t author_count = 0;
  std::size_t recipient_count = 0;
  std::size_t labeled_utterance_count = 0;
  std::size_t labeled_recipient_count = 0;
  std::map<std::string, std::size_t> recipients_per_label;
  std::map<std::string, std::size_t> utterances_per_label;
  double mean_chars = 0.0;
  // Recipients seen with more than one label; each is counted under its
  // first label only.
  std::size_t label_conflicts = 0;
};

inline CorpusStats corpus_stats(const std::vector<UtteranceRecord>& records) {
  CorpusStats s;
  std::unordered_set<std::string> authors, recipients;
  std::map<std::string, std::string> recipient_label;
  std::set<std::string> conflicted;
  std::uint64_t chars = 0;
  for (const auto& r : records) {
    ++s.utterance_count;
    authors.insert(r.author_id);
    recipients.insert(r.recipient_id);
    chars += text::char_length(r.text);
    if (!r.recipient_label) continue;
    ++s.labeled_utterance_count;
    ++s.utterances_per_label[*r.recipient_label];
    auto [it, fresh] = recipient_label.emplace(r.recipient_id, *r.recipient_label);
    if (fresh)
      ++s.recipients_per_label[*r.recipient_label];
    else if (it->second != *r.recipient_label)
      conflicted.insert(r.recipient_id);
  }
  s.author_count = authors.size();
  s.recipient_count = recipients.size();
  s.labeled_recipient_count = recipient_label.size();
  s.label_conflicts = conflicted.size();
  if (s.utterance_count > 0)
    s.mean_chars = static_cast<double>(chars) / static_cast<double>(s.utterance_count);
  return s;
}

inline std::vector<std::pair<std::string, std::string>> stats_rows(const CorpusStats& s) {
  std::vector<std::pair<std::string, std::string>> rows;
  rows.emplace_back("utterances", std::to_string(s.utterance_count));
  rows.emplace_back("authors", std::to_string(s.author_count));
  rows.emplace_back("recipients", std::to_string(s.recipient_count));
  rows.emplace_back("labeled_utterances", std::to_string(s.labeled_utterance_count));
  rows.emplace_back("labeled_recipients", std::to_string(s.labeled_recipient_count));
  for (const auto& [label, n] : s.recipients_per_label)
    rows.emplace_back("recipients[" + label + "]", std::to_string(n));
  for (const auto& [label, n] : s.utterances_per_label)
    rows.emplace_back("utterances[" + label + "]", std::to_string(n));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", s.mean_chars);
  rows.emplace_back("mean_chars", buf);
  rows.emplace_back("label_conflicts", std::to_string(s.label_conflicts));
  return rows;
}

inline std::string stats_csv(const CorpusStats& s) {
  std::ostringstream out;
  out << "key,value\n";
  for (const auto& [k, v] : stats_rows(s)) out << k << ',' << v << '\n';
  return out.str();
}

inline std::string stats_text(const CorpusStats& s, const std::string& title) {
  std::ostringstream out;
  out << title << '\n';
  for (const auto& [k, v] : stats_rows(s)) {
    out << "  " << k;
    for (std::size_t i = k.size(); i < 24; ++i) out << ' ';
    out << v << '\n';
  }
  return out.str();
}

}  // namespace recipro
