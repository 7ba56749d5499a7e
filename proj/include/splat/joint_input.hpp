#pragma once

#include <string>
#include <utility>
#include <vector>

#include "splat/attention.hpp"
#include "splat/schema.hpp"
#include "splat/vocab.hpp"

namespace splat {

// The assembled sequence
//   [CLS] U [SEP] [NONE] [DONTCARE] D_intent D_slot [SEP]
// with the shared targets and both description blocks globally attended and
// every special-token position recorded.
struct JointInput {
  std::vector<int> token_ids;
  GlobalMask global_mask;
  std::vector<int> utt_positions;            // one [UTT] per system-user pair
  std::vector<int> intent_positions;         // K+1 [INTENT] tokens, NONE intent last
  std::vector<int> slot_positions;           // L [SLOT] tokens
  std::vector<int> shared_target_positions;  // {[NONE], [DONTCARE]}
  std::pair<int, int> history_region{0, 0};  // [start, end) covering U
  // Per slot, inclusive (start,end) token ranges of each enumerated
  // categorical value; empty for non-categorical slots.
  std::vector<std::vector<std::pair<int, int>>> slot_value_regions;

  int none_position() const { return shared_target_positions[0]; }
  int dontcare_position() const { return shared_target_positions[1]; }
  int length() const { return static_cast<int>(token_ids.size()); }
};

// Name and description appended to the schema's intents as the always-present
// fallback intent.
extern const char* const kNoneIntentName;
extern const char* const kNoneIntentDescription;

// Utterance block as token strings: one "[UTT]" marker per system-user pair
// (a leading user turn forms its own pair), each utterance prefixed by its
// speaker word. up_to_user_turn < 0 renders everything; otherwise turns up to
// and including that user-turn ordinal.
std::vector<std::string> render_utterances(const Dialogue& dlg, int up_to_user_turn = -1);

// Slot block: name ":" description [":" v1 "," v2 ...] "[SLOT]".
// value_ranges (when given) receives each value's inclusive token range,
// relative to the start of the returned block.
std::vector<std::string> render_slot_description(
    const SlotDef& slot, std::vector<std::pair<int, int>>* value_ranges = nullptr);

// Intent block: name ":" description "[INTENT]".
std::vector<std::string> render_intent_description(const IntentDef& intent);

JointInput assemble(const Dialogue& dlg, const ServiceSchema& schema, const Vocabulary& vocab,
                    int max_seq_len, int up_to_user_turn = -1);

// Text documents covering everything the renderers can emit for these
// corpora; the vocabulary is built over them.
std::vector<std::string> corpus_documents(const std::vector<ServiceSchema>& schemas,
                                          const std::vector<Dialogue>& dialogues);

}  // namespace splat
