#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splat/schema.hpp"

namespace splat {

struct SynthOutput {
  std::vector<ServiceSchema> schemas;
  std::vector<Dialogue> dialogues;
  std::vector<std::string> rss_docs;  // one document per entry, single line
};

// Deterministic desk-scale corpus: services with 2-4 intents and 3-6 slots
// (mixed categorical / extractive), templated dialogues whose gold values
// appear verbatim in the user utterances, cumulative per-turn states, and a
// plain-text corpus with planted recurring spans.
SynthOutput gen_synth(uint64_t seed, int n_services, int n_dialogues);

}  // namespace splat
