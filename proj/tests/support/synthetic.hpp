#pragma once

// Generator for the bundled planted-signal corpus and a few random-input
// helpers shared by the property tests.
//
// Each recipient gets one conversation with its own author. Utterances are
// filler words drawn uniformly from a small vocabulary; in utterances
// addressed to an "F" recipient a marker token is inserted with probability
// plant_rate. "M" utterances never contain it. Some utterances also carry
// transcription tags that cleaning must remove.

#include <algorithm>
#include <cstdint>
#include <tuple>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "recipro/corpus.hpp"
#include "recipro/rng.hpp"

namespace synth {

struct PlantedSpec {
  std::string dataset_id = "synth";
  int recipients_f = 22;
  int recipients_m = 18;
  int utterances_per_recipient = 5;
  double plant_rate = 0.7;
  int min_words = 6;
  int max_words = 10;
  double tag_rate = 0.2;
  std::uint64_t seed = 20240611;
  std::string marker = "zorblax";
  std::vector<std::string> vocabulary{"the",  "we",    "just", "really", "think", "about",
                                      "that", "going", "yeah", "know",   "maybe", "there"};
};

inline std::vector<recipro::UtteranceRecord> planted_corpus(const PlantedSpec& spec = {}) {
  recipro::Rng rng(spec.seed);
  std::vector<recipro::UtteranceRecord> out;
  const int total = spec.recipients_f + spec.recipients_m;
  // Interleave the two classes so neither clusters at the start of the file.
  std::vector<std::string> labels;
  for (int i = 0; i < spec.recipients_f; ++i) labels.push_back("F");
  for (int i = 0; i < spec.recipients_m; ++i) labels.push_back("M");
  recipro::shuffle(std::span<std::string>(labels), rng);

  for (int r = 0; r < total; ++r) {
    const std::string& label = labels[static_cast<std::size_t>(r)];
    for (int u = 0; u < spec.utterances_per_recipient; ++u) {
      const auto span = static_cast<std::uint64_t>(spec.max_words - spec.min_words + 1);
      const int n = spec.min_words + static_cast<int>(recipro::uniform_below(rng, span));
      std::vector<std::string> words;
      for (int w = 0; w < n; ++w)
        words.push_back(spec.vocabulary[recipro::uniform_below(rng, spec.vocabulary.size())]);
      if (label == "F" && recipro::uniform01(rng) < spec.plant_rate) {
        const auto pos = recipro::uniform_below(rng, words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), spec.marker);
      }
      if (recipro::uniform01(rng) < spec.tag_rate) {
        const auto pos = recipro::uniform_below(rng, words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos),
                     recipro::uniform_below(rng, 2) == 0 ? "<laughter>" : "{F uh }");
      }
      recipro::UtteranceRecord rec;
      rec.dataset_id = spec.dataset_id;
      rec.conversation_id = "conv" + std::to_string(r);
      rec.turn_index = u;
      rec.author_id = "a" + std::to_string(r);
      rec.recipient_id = "r" + std::to_string(r);
      std::string text;
      for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
      rec.text = text;
      rec.recipient_label = label;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

inline std::string planted_jsonl(const PlantedSpec& spec = {}) {
  std::string s;
  for (const auto& r : planted_corpus(spec)) s += recipro::to_json(r).dump() + "\n";
  return s;
}

// Bayes-optimal balanced accuracy for telling the classes apart from a single
// utterance, by enumerating every structural outcome of the generator (class,
// plant decision, length, marker position). Filler words are drawn the same
// way for both classes, so they cancel out of every posterior and are not
// enumerated. Classes are weighted equally, as after balancing.
inline double planted_bayes_rate(const PlantedSpec& spec = {}) {
  // observation: (contains marker, length, marker position or -1) -> P(obs | class)
  std::map<std::tuple<bool, int, int>, std::map<std::string, double>> joint;
  const int lengths = spec.max_words - spec.min_words + 1;
  for (const std::string label : {"F", "M"}) {
    const double plant = label == "F" ? spec.plant_rate : 0.0;
    for (int n = spec.min_words; n <= spec.max_words; ++n) {
      const double p_len = 1.0 / lengths;
      joint[{false, n, -1}][label] += 0.5 * p_len * (1.0 - plant);
      for (int pos = 0; pos <= n; ++pos) joint[{true, n, pos}][label] += 0.5 * p_len * plant / (n + 1);
    }
  }
  double correct = 0.0;
  for (const auto& [obs, by_label] : joint) {
    double best = 0.0;
    for (const auto& [_, p] : by_label) best = std::max(best, p);
    correct += best;
  }
  return correct;
}

}  // namespace synth
