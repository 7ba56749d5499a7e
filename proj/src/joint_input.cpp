#include "splat/joint_input.hpp"

#include <stdexcept>

namespace splat {

const char* const kNoneIntentName = "NONE";
const char* const kNoneIntentDescription = "none of the intents are active";

namespace {

void append_words(std::vector<std::string>& out, const std::string& text) {
  for (std::string& t : tokenize(text)) out.push_back(std::move(t));
}

}  // namespace

std::vector<std::string> render_utterances(const Dialogue& dlg, int up_to_user_turn) {
  std::vector<std::string> out;
  int user_seen = 0;
  bool pair_open = false;
  for (const DialogueTurn& turn : dlg.turns) {
    if (up_to_user_turn >= 0 && user_seen > up_to_user_turn) break;
    if (!pair_open) {
      out.push_back("[UTT]");
      pair_open = true;
    }
    out.push_back(turn.speaker == Speaker::User ? "user" : "system");
    append_words(out, turn.text);
    if (turn.speaker == Speaker::User) {
      pair_open = false;  // a user turn closes its pair
      ++user_seen;
    }
  }
  return out;
}

std::vector<std::string> render_slot_description(const SlotDef& slot,
                                                 std::vector<std::pair<int, int>>* value_ranges) {
  std::vector<std::string> out;
  append_words(out, slot.name);
  out.push_back(":");
  append_words(out, slot.description);
  if (slot.is_categorical) {
    out.push_back(":");
    for (size_t v = 0; v < slot.possible_values.size(); ++v) {
      if (v) out.push_back(",");
      const int start = static_cast<int>(out.size());
      append_words(out, slot.possible_values[v]);
      if (value_ranges) value_ranges->emplace_back(start, static_cast<int>(out.size()) - 1);
    }
  }
  out.push_back("[SLOT]");
  return out;
}

std::vector<std::string> render_intent_description(const IntentDef& intent) {
  std::vector<std::string> out;
  append_words(out, intent.name);
  out.push_back(":");
  append_words(out, intent.description);
  out.push_back("[INTENT]");
  return out;
}

JointInput assemble(const Dialogue& dlg, const ServiceSchema& schema, const Vocabulary& vocab,
                    int max_seq_len, int up_to_user_turn) {
  JointInput ji;
  std::vector<std::string> toks;
  toks.push_back("[CLS]");

  const int history_start = static_cast<int>(toks.size());
  std::vector<std::string> utt = render_utterances(dlg, up_to_user_turn);
  for (size_t i = 0; i < utt.size(); ++i) {
    if (utt[i] == "[UTT]") ji.utt_positions.push_back(history_start + static_cast<int>(i));
    toks.push_back(std::move(utt[i]));
  }
  ji.history_region = {history_start, static_cast<int>(toks.size())};
  toks.push_back("[SEP]");

  const int global_start = static_cast<int>(toks.size());
  ji.shared_target_positions = {global_start, global_start + 1};
  toks.push_back("[NONE]");
  toks.push_back("[DONTCARE]");

  std::vector<IntentDef> intents = schema.intents;
  intents.push_back({kNoneIntentName, kNoneIntentDescription});
  for (const IntentDef& intent : intents) {
    for (std::string& t : render_intent_description(intent)) {
      if (t == "[INTENT]") ji.intent_positions.push_back(static_cast<int>(toks.size()));
      toks.push_back(std::move(t));
    }
  }

  ji.slot_value_regions.resize(schema.slots.size());
  for (size_t s = 0; s < schema.slots.size(); ++s) {
    std::vector<std::pair<int, int>> ranges;
    const int block_start = static_cast<int>(toks.size());
    for (std::string& t : render_slot_description(schema.slots[s], &ranges)) {
      if (t == "[SLOT]") ji.slot_positions.push_back(static_cast<int>(toks.size()));
      toks.push_back(std::move(t));
    }
    for (auto& [a, b] : ranges)
      ji.slot_value_regions[s].emplace_back(block_start + a, block_start + b);
  }
  const int global_end = static_cast<int>(toks.size());  // exclusive
  toks.push_back("[SEP]");

  if (static_cast<int>(toks.size()) > max_seq_len)
    throw std::runtime_error("assemble: dialogue '" + dlg.dialogue_id + "' renders to " +
                             std::to_string(toks.size()) + " tokens, over the limit of " +
                             std::to_string(max_seq_len));

  ji.token_ids.reserve(toks.size());
  for (const std::string& t : toks) ji.token_ids.push_back(vocab.id(t));
  ji.global_mask.assign(toks.size(), 0);
  for (int i = global_start; i < global_end; ++i) ji.global_mask[static_cast<size_t>(i)] = 1;
  return ji;
}

std::vector<std::string> corpus_documents(const std::vector<ServiceSchema>& schemas,
                                          const std::vector<Dialogue>& dialogues) {
  std::vector<std::string> docs;
  docs.emplace_back("user system : ,");
  for (const ServiceSchema& s : schemas) {
    std::string doc;
    for (const IntentDef& it : s.intents) doc += it.name + " : " + it.description + "\n";
    doc += std::string(kNoneIntentName) + " : " + kNoneIntentDescription + "\n";
    for (const SlotDef& sl : s.slots) {
      doc += sl.name + " : " + sl.description;
      for (const std::string& v : sl.possible_values) doc += " , " + v;
      doc += "\n";
    }
    docs.push_back(std::move(doc));
  }
  for (const Dialogue& d : dialogues) {
    std::string doc;
    for (const DialogueTurn& t : d.turns) doc += t.text + "\n";
    for (const DialogueTurn& t : d.turns)
      if (t.speaker == Speaker::User)
        for (const auto& [slot, value] : t.state.slot_values) doc += value + "\n";
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace splat
