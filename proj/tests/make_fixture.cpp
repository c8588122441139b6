// Regenerates tests/fixtures/synthetic_corpus.jsonl:
//   make_fixture <output path>

#include <fstream>
#include <iostream>

#include "support/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <output.jsonl>\n";
    return 1;
  }
  std::ofstream out(argv[1], std::ios::binary | std::ios::trunc);
  out << synth::planted_jsonl();
  return out ? 0 : 1;
}
