#pragma once

#include <map>
#include <string>
#include <vector>

#include "splat/schema.hpp"

namespace splat {

enum class MatchMode { Exact, Fuzzy };

inline const char* match_mode_name(MatchMode m) { return m == MatchMode::Exact ? "exact" : "fuzzy"; }

// Lowercase, strip punctuation, collapse whitespace.
std::string metric_normalize(const std::string& s);

// 1 - levenshtein(normalize(a), normalize(b)) / max length; symmetric,
// 1.0 iff the normalized strings are equal.
double fuzzy_match(const std::string& a, const std::string& b);

// Fraction of turns whose active intent name matches exactly.
double intent_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds);

// A turn is correct iff predicted and gold maps have identical key sets and
// every value matches: categorical slots by normalized equality in both
// modes, non-categorical by normalized equality (exact mode) or
// fuzzy_match >= threshold (fuzzy mode).
bool turn_matches(const DialogueState& pred, const DialogueState& gold,
                  const ServiceSchema& schema, MatchMode mode, double threshold);

double jga(const std::vector<DialogueState>& preds, const std::vector<DialogueState>& golds,
           const std::vector<const ServiceSchema*>& schemas, MatchMode mode,
           double threshold = 0.9);

struct TurnRecord {
  std::string dialogue_id;
  int turn_index = 0;
  std::string service;
  bool seen = true;
  DialogueState pred;
  DialogueState gold;
  bool intent_correct = false;
  bool turn_correct = false;
};

struct EvalReport {
  std::string matching_mode = "fuzzy";
  double threshold = 0.9;
  int n_turns = 0;
  double intent_accuracy = 0.0;
  double jga = 0.0;
  int seen_turns = 0, unseen_turns = 0;
  double seen_jga = 0.0, unseen_jga = 0.0;
  double seen_intent_accuracy = 0.0, unseen_intent_accuracy = 0.0;
  int unreachable_turns = 0;
  std::vector<TurnRecord> per_turn;

  std::string to_json() const;
  std::string to_table() const;
};

// Fills per-turn correctness and the aggregate metrics.
EvalReport build_report(std::vector<TurnRecord> turns,
                        const std::map<std::string, const ServiceSchema*>& schemas, MatchMode mode,
                        double threshold, int unreachable_turns);

}  // namespace splat
