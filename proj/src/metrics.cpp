#include "splat/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace splat {

std::string metric_normalize(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      pending_space = true;
    }
    // punctuation is dropped without forcing a break: "don't" -> "dont"
  }
  return out;
}

namespace {

size_t levenshtein(const std::string& a, const std::string& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<size_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

double fuzzy_match(const std::string& a, const std::string& b) {
  const std::string na = metric_normalize(a), nb = metric_normalize(b);
  const size_t mx = std::max(na.size(), nb.size());
  if (mx == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(na, nb)) / static_cast<double>(mx);
}

double intent_accuracy(const std::vector<std::string>& preds,
                       const std::vector<std::string>& golds) {
  if (preds.size() != golds.size())
    throw std::runtime_error("intent_accuracy: " + std::to_string(preds.size()) +
                             " predictions vs " + std::to_string(golds.size()) + " golds");
  if (preds.empty()) return 0.0;
  int hits = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == golds[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

bool turn_matches(const DialogueState& pred, const DialogueState& gold,
                  const ServiceSchema& schema, MatchMode mode, double threshold) {
  if (pred.slot_values.size() != gold.slot_values.size()) return false;
  auto pit = pred.slot_values.begin();
  auto git = gold.slot_values.begin();
  for (; git != gold.slot_values.end(); ++pit, ++git) {
    if (pit->first != git->first) return false;  // key sets must be identical
    const int si = schema.slot_index(git->first);
    const bool categorical = si >= 0 && schema.slot(si).is_categorical;
    if (pit->second == "dontcare" || git->second == "dontcare") {
      if (pit->second != git->second) return false;
      continue;
    }
    if (categorical || mode == MatchMode::Exact) {
      if (metric_normalize(pit->second) != metric_normalize(git->second)) return false;
    } else {
      if (fuzzy_match(pit->second, git->second) < threshold) return false;
    }
  }
  return true;
}

double jga(const std::vector<DialogueState>& preds, const std::vector<DialogueState>& golds,
           const std::vector<const ServiceSchema*>& schemas, MatchMode mode, double threshold) {
  if (preds.size() != golds.size() || preds.size() != schemas.size())
    throw std::runtime_error("jga: misaligned turn lists (" + std::to_string(preds.size()) + ", " +
                             std::to_string(golds.size()) + ", " + std::to_string(schemas.size()) +
                             ")");
  if (preds.empty()) return 0.0;
  int hits = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (turn_matches(preds[i], golds[i], *schemas[i], mode, threshold)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

EvalReport build_report(std::vector<TurnRecord> turns,
                        const std::map<std::string, const ServiceSchema*>& schemas, MatchMode mode,
                        double threshold, int unreachable_turns) {
  EvalReport r;
  r.matching_mode = match_mode_name(mode);
  r.threshold = threshold;
  r.unreachable_turns = unreachable_turns;
  r.n_turns = static_cast<int>(turns.size());
  int jga_hits = 0, intent_hits = 0;
  int seen_jga_hits = 0, unseen_jga_hits = 0, seen_intent_hits = 0, unseen_intent_hits = 0;
  for (TurnRecord& t : turns) {
    auto it = schemas.find(t.service);
    if (it == schemas.end())
      throw std::runtime_error("report: unknown service '" + t.service + "'");
    t.intent_correct = t.pred.active_intent == t.gold.active_intent;
    t.turn_correct = turn_matches(t.pred, t.gold, *it->second, mode, threshold);
    t.seen = it->second->seen;
    (t.seen ? r.seen_turns : r.unseen_turns) += 1;
    if (t.intent_correct) {
      ++intent_hits;
      (t.seen ? seen_intent_hits : unseen_intent_hits) += 1;
    }
    if (t.turn_correct) {
      ++jga_hits;
      (t.seen ? seen_jga_hits : unseen_jga_hits) += 1;
    }
  }
  if (r.n_turns > 0) {
    r.intent_accuracy = static_cast<double>(intent_hits) / r.n_turns;
    r.jga = static_cast<double>(jga_hits) / r.n_turns;
  }
  if (r.seen_turns > 0) {
    r.seen_jga = static_cast<double>(seen_jga_hits) / r.seen_turns;
    r.seen_intent_accuracy = static_cast<double>(seen_intent_hits) / r.seen_turns;
  }
  if (r.unseen_turns > 0) {
    r.unseen_jga = static_cast<double>(unseen_jga_hits) / r.unseen_turns;
    r.unseen_intent_accuracy = static_cast<double>(unseen_intent_hits) / r.unseen_turns;
  }
  r.per_turn = std::move(turns);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["matching_mode"] = matching_mode;
  j["threshold"] = threshold;
  j["n_turns"] = n_turns;
  j["intent_accuracy"] = intent_accuracy;
  j["jga"] = jga;
  j["seen"] = {{"n_turns", seen_turns}, {"jga", seen_jga}, {"intent_accuracy", seen_intent_accuracy}};
  j["unseen"] = {{"n_turns", unseen_turns},
                 {"jga", unseen_jga},
                 {"intent_accuracy", unseen_intent_accuracy}};
  j["unreachable_turns"] = unreachable_turns;
  nlohmann::json turns = nlohmann::json::array();
  for (const TurnRecord& t : per_turn) {
    turns.push_back({{"dialogue_id", t.dialogue_id},
                     {"turn_index", t.turn_index},
                     {"service", t.service},
                     {"seen", t.seen},
                     {"intent_correct", t.intent_correct},
                     {"turn_correct", t.turn_correct}});
  }
  j["per_turn"] = std::move(turns);
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "turns " << n_turns << " | mode " << matching_mode << "\n";
  os << "  intent accuracy  " << intent_accuracy << "\n";
  os << "  joint goal acc   " << jga << "\n";
  if (seen_turns > 0) os << "  seen   jga " << seen_jga << "  (" << seen_turns << " turns)\n";
  if (unseen_turns > 0) os << "  unseen jga " << unseen_jga << "  (" << unseen_turns << " turns)\n";
  if (unreachable_turns > 0) os << "  unreachable gold turns: " << unreachable_turns << "\n";
  return os.str();
}

}  // namespace splat
