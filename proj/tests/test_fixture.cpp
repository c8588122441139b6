// The bundled synthetic corpus must be exactly what the generator produces.

#include <gtest/gtest.h>

#include "recipro/hash.hpp"
#include "support/synthetic.hpp"

TEST(Fixture, BundledCorpusMatchesGenerator) {
  const auto bundled = recipro::read_file(std::string(RECIPRO_FIXTURE_DIR) + "/synthetic_corpus.jsonl");
  EXPECT_EQ(bundled, synth::planted_jsonl());
}

TEST(Fixture, PlantedBayesRate) {
  const synth::PlantedSpec spec;
  EXPECT_NEAR(synth::planted_bayes_rate(spec), 0.85, 1e-12);
  synth::PlantedSpec never;
  never.plant_rate = 0.0;
  EXPECT_NEAR(synth::planted_bayes_rate(never), 0.5, 1e-12);
  synth::PlantedSpec always;
  always.plant_rate = 1.0;
  EXPECT_NEAR(synth::planted_bayes_rate(always), 1.0, 1e-12);
}
