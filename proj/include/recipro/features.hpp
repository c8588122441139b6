#pragma once

// Hashed word / character n-gram features with optional TF-IDF weighting.
//
// Feature keys are "w:" + space-joined word n-gram or "c:" + character
// n-gram (code points of the raw, optionally lowercased, string); the index
// is FNV-1a-64(key) mod hash_dims.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "recipro/binio.hpp"
#include "recipro/error.hpp"
#include "recipro/hash.hpp"
#include "recipro/text.hpp"

namespace recipro {

struct NgramRange {
  int low = 1;
  int high = 1;
  bool operator==(const NgramRange&) const = default;
};

struct FeaturizerConfig {
  NgramRange word_ngrams{1, 2};
  NgramRange char_ngrams{3, 5};
  std::uint32_t hash_dims = 1u << 18;
  bool use_tfidf = true;
  bool lowercase = true;

  bool operator==(const FeaturizerConfig&) const = default;

  // A range with low = high = 0 disables that feature family.
  void validate() const {
    for (const auto& r : {word_ngrams, char_ngrams}) {
      if (r.low < 0 || r.low > r.high || (r.low == 0 && r.high != 0))
        throw validation_error("invalid_featurizer", "bad n-gram range");
    }
    if (hash_dims < 2 || (hash_dims & (hash_dims - 1)) != 0)
      throw validation_error("invalid_featurizer", "hash_dims must be a power of two >= 2");
  }

  std::string digest() const {
    Digest d;
    d.add("featurizer/1")
        .add(static_cast<std::uint64_t>(word_ngrams.low))
        .add(static_cast<std::uint64_t>(word_ngrams.high))
        .add(static_cast<std::uint64_t>(char_ngrams.low))
        .add(static_cast<std::uint64_t>(char_ngrams.high))
        .add(std::uint64_t{hash_dims})
        .add(std::uint64_t{use_tfidf})
        .add(std::uint64_t{lowercase});
    return d.hex();
  }
};

struct SparseEntry {
  std::uint32_t index = 0;
  double weight = 0.0;
  bool operator==(const SparseEntry&) const = default;
};

// Strictly increasing indices.
struct SparseVector {
  std::vector<SparseEntry> entries;

  bool empty() const { return entries.empty(); }
  double norm() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight * e.weight;
    return std::sqrt(s);
  }
  bool operator==(const SparseVector&) const = default;
};

inline std::uint32_t hash_token(std::string_view token_bytes, std::uint32_t hash_dims) {
  return static_cast<std::uint32_t>(fnv1a64(token_bytes) % hash_dims);
}

// Calls fn(index) once per n-gram occurrence.
template <typename Fn>
void for_each_feature(std::string_view raw, const FeaturizerConfig& cfg, Fn&& fn) {
  const std::string s = cfg.lowercase ? text::ascii_lower(raw) : std::string(raw);
  std::string key;
  if (cfg.word_ngrams.high > 0) {
    const auto words = text::split_whitespace(s);
    for (int n = cfg.word_ngrams.low; n <= cfg.word_ngrams.high; ++n) {
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i) {
        key.assign("w:");
        for (int k = 0; k < n; ++k) {
          if (k) key.push_back(' ');
          key.append(words[i + k]);
        }
        fn(hash_token(key, cfg.hash_dims));
      }
    }
  }
  if (cfg.char_ngrams.high > 0) {
    const auto cp = text::code_point_offsets(s);
    const std::size_t count = cp.size() - 1;
    for (int n = cfg.char_ngrams.low; n <= cfg.char_ngrams.high; ++n) {
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= count; ++i) {
        key.assign("c:");
        key.append(s, cp[i], cp[i + n] - cp[i]);
        fn(hash_token(key, cfg.hash_dims));
      }
    }
  }
}

// Unweighted, unnormalized n-gram counts.
inline SparseVector count_features(std::string_view text, const FeaturizerConfig& cfg) {
  std::vector<std::uint32_t> idx;
  for_each_feature(text, cfg, [&](std::uint32_t i) { idx.push_back(i); });
  std::sort(idx.begin(), idx.end());
  SparseVector v;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && idx[j] == idx[i]) ++j;
    v.entries.push_back({idx[i], static_cast<double>(j - i)});
    i = j;
  }
  return v;
}

class FittedFeaturizer {
 public:
  FittedFeaturizer() = default;
  FittedFeaturizer(FeaturizerConfig cfg, std::vector<std::pair<std::uint32_t, double>> idf,
                   std::string fitted_on)
      : cfg_(std::move(cfg)), idf_(std::move(idf)), fitted_on_(std::move(fitted_on)) {
    cfg_.validate();
    lookup_.reserve(idf_.size());
    for (const auto& [i, w] : idf_) lookup_.emplace(i, w);
  }

  const FeaturizerConfig& config() const { return cfg_; }
  // Sorted by index; empty when use_tfidf is off.
  const std::vector<std::pair<std::uint32_t, double>>& idf_table() const { return idf_; }
  const std::string& fitted_on() const { return fitted_on_; }

  // Unseen indices weigh 1.
  double idf(std::uint32_t index) const {
    auto it = lookup_.find(index);
    return it == lookup_.end() ? 1.0 : it->second;
  }

  // Counts, TF-IDF weighted when enabled, then L2-normalized. Empty text
  // (or text too short for any n-gram) yields the zero vector.
  SparseVector operator()(std::string_view text) const {
    SparseVector v = count_features(text, cfg_);
    if (cfg_.use_tfidf)
      for (auto& e : v.entries) e.weight *= idf(e.index);
    const double n = v.norm();
    if (n > 0.0)
      for (auto& e : v.entries) e.weight /= n;
    return v;
  }

  std::string digest() const {
    Digest d;
    d.add(cfg_.digest());
    for (const auto& [i, w] : idf_) d.add(i).add(std::to_string(w));
    return d.hex();
  }

  bool operator==(const FittedFeaturizer& o) const {
    return cfg_ == o.cfg_ && idf_ == o.idf_ && fitted_on_ == o.fitted_on_;
  }

 private:
  FeaturizerConfig cfg_;
  std::vector<std::pair<std::uint32_t, double>> idf_;
  std::string fitted_on_;
  std::unordered_map<std::uint32_t, double> lookup_;
};

// idf(t) = ln((1 + N) / (1 + df(t))) + 1 over hashed indices.
inline FittedFeaturizer fit(const std::vector<std::string>& documents, const FeaturizerConfig& cfg) {
  cfg.validate();
  if (documents.empty()) throw data_error("empty_corpus", "featurizer fit needs at least one document");
  Digest corpus;
  std::vector<std::pair<std::uint32_t, double>> idf;
  if (cfg.use_tfidf) {
    std::map<std::uint32_t, std::uint64_t> df;
    for (const auto& doc : documents) {
      corpus.add(doc);
      for (const auto& e : count_features(doc, cfg).entries) ++df[e.index];
    }
    const double n = static_cast<double>(documents.size());
    idf.reserve(df.size());
    for (const auto& [i, c] : df)
      idf.emplace_back(i, std::log((1.0 + n) / (1.0 + static_cast<double>(c))) + 1.0);
  } else {
    for (const auto& doc : documents) corpus.add(doc);
  }
  return FittedFeaturizer(cfg, std::move(idf), corpus.hex());
}

inline SparseVector featurize(const FittedFeaturizer& f, std::string_view text) { return f(text); }

// ---------------------------------------------------------------------------
// RPFEAT1 file: magic, version byte, config, fitted_on, idf pairs.

inline constexpr std::string_view kFeaturizerMagic = "RPFEAT1";
inline constexpr std::uint8_t kFeaturizerVersion = 1;

inline std::string serialize(const FittedFeaturizer& f) {
  bin::Writer w;
  w.raw(kFeaturizerMagic);
  w.u8(kFeaturizerVersion);
  const auto& c = f.config();
  w.u32(static_cast<std::uint32_t>(c.word_ngrams.low));
  w.u32(static_cast<std::uint32_t>(c.word_ngrams.high));
  w.u32(static_cast<std::uint32_t>(c.char_ngrams.low));
  w.u32(static_cast<std::uint32_t>(c.char_ngrams.high));
  w.u32(c.hash_dims);
  w.u8(c.use_tfidf);
  w.u8(c.lowercase);
  w.str(f.fitted_on());
  w.u64(f.idf_table().size());
  for (const auto& [i, v] : f.idf_table()) {
    w.u32(i);
    w.f64(v);
  }
  return w.bytes();
}

inline FittedFeaturizer deserialize_featurizer(std::string_view bytes) {
  bin::Reader r(bytes, "corrupt_featurizer");
  if (r.raw(kFeaturizerMagic.size()) != kFeaturizerMagic) r.fail("bad magic");
  if (r.u8() != kFeaturizerVersion) r.fail("unsupported version");
  FeaturizerConfig c;
  c.word_ngrams.low = static_cast<int>(r.u32());
  c.word_ngrams.high = static_cast<int>(r.u32());
  c.char_ngrams.low = static_cast<int>(r.u32());
  c.char_ngrams.high = static_cast<int>(r.u32());
  c.hash_dims = r.u32();
  c.use_tfidf = r.u8() != 0;
  c.lowercase = r.u8() != 0;
  std::string fitted_on = r.str();
  const auto n = r.u64();
  if (n > r.remaining() / 12) r.fail("idf table larger than file");
  std::vector<std::pair<std::uint32_t, double>> idf;
  idf.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto i = r.u32();
    const auto v = r.f64();
    if (i >= c.hash_dims || !(v >= 0.0) || (!idf.empty() && i <= idf.back().first))
      r.fail("invalid idf entry");
    idf.emplace_back(i, v);
  }
  if (!r.done()) r.fail("trailing bytes");
  try {
    return FittedFeaturizer(c, std::move(idf), std::move(fitted_on));
  } catch (const Error& e) {
    r.fail(e.what());
  }
}

inline void save_featurizer(const FittedFeaturizer& f, const std::string& path) {
  bin::Writer w;
  w.raw(serialize(f));
  w.save(path);
}

inline FittedFeaturizer load_featurizer(const std::string& path) {
  return deserialize_featurizer(read_file(path));
}

}  // namespace recipro
