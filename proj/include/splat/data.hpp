#pragma once

#include <string>
#include <vector>

#include "splat/schema.hpp"

namespace splat {

struct UnreachableGold {
  std::string dialogue_id;
  int turn_index = 0;  // user-turn ordinal
  std::string slot;
};

struct Corpus {
  std::vector<ServiceSchema> schemas;
  std::vector<Dialogue> dialogues;
  // Extractive gold values that never appear in their turn's rendered
  // history; these turns stay in the corpus but are flagged.
  std::vector<UnreachableGold> unreachable;

  const ServiceSchema& schema_of(const std::string& service_name) const;
};

// Loads and validates both files: dialogues must reference known services,
// gold slot names must exist, categorical gold values must come from
// possible_values (or "dontcare"); extractive golds missing from the history
// are flagged, not dropped.
Corpus load_corpus(const std::string& schema_path, const std::string& dialogues_path);
Corpus validate_corpus(std::vector<ServiceSchema> schemas, std::vector<Dialogue> dialogues);

// Replaces intent and slot descriptions with a name-aligned variant's,
// leaving names, values, and gold labels untouched.
Corpus swap_schema_variant(const Corpus& corpus, const std::vector<ServiceSchema>& variant);

}  // namespace splat
