#include "splat/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "splat/ops.hpp"

namespace splat {

void init_model_params(ParamStore& params, const SplatConfig& cfg) {
  cfg.validate();
  init_encoder_params(params, cfg.encoder);
  init_head_params(params, cfg.head);
}

namespace {

// Earliest occurrence of `needle` inside the history region, or {-1,-1}.
std::pair<int, int> find_in_history(const JointInput& ji, const std::vector<int>& needle) {
  if (needle.empty()) return {-1, -1};
  const auto [hs, he] = ji.history_region;
  const int n = static_cast<int>(needle.size());
  for (int start = hs; start + n <= he; ++start) {
    bool match = true;
    for (int k = 0; k < n; ++k) {
      if (ji.token_ids[static_cast<size_t>(start + k)] != needle[static_cast<size_t>(k)]) {
        match = false;
        break;
      }
    }
    if (match) return {start, start + n - 1};
  }
  return {-1, -1};
}

// Subset position of a history span candidate, or of a categorical value.
int subset_position_of_candidate(const std::vector<int>& subset, int candidate_index) {
  auto it = std::find(subset.begin(), subset.end(), candidate_index);
  return it == subset.end() ? -1 : static_cast<int>(it - subset.begin());
}

}  // namespace

std::vector<DstInstance> build_instances(const ServiceSchema& schema, const Dialogue& dlg,
                                         const Vocabulary& vocab, const SplatConfig& cfg) {
  if (dlg.service != schema.service_name)
    throw std::runtime_error("build_instances: dialogue '" + dlg.dialogue_id +
                             "' references service '" + dlg.service + "', got schema '" +
                             schema.service_name + "'");
  // Gold intents for all user turns, validated up front.
  std::vector<int> intents_by_user_turn;
  std::vector<const DialogueState*> states_by_user_turn;
  for (const DialogueTurn& t : dlg.turns) {
    if (t.speaker != Speaker::User) continue;
    int idx;
    if (t.state.active_intent == kNoneIntentName) {
      idx = static_cast<int>(schema.intents.size());
    } else {
      idx = schema.intent_index(t.state.active_intent);
      if (idx < 0)
        throw std::runtime_error("dialogue '" + dlg.dialogue_id + "': unknown intent '" +
                                 t.state.active_intent + "' for service '" + schema.service_name +
                                 "'");
    }
    intents_by_user_turn.push_back(idx);
    states_by_user_turn.push_back(&t.state);
  }

  std::vector<DstInstance> out;
  const int n_user = static_cast<int>(intents_by_user_turn.size());
  for (int u = 0; u < n_user; ++u) {
    DstInstance inst;
    inst.dialogue_id = dlg.dialogue_id;
    inst.service_name = schema.service_name;
    inst.turn_index = u;
    inst.ji = assemble(dlg, schema, vocab, cfg.encoder.max_seq_len, u);
    inst.candidates = enumerate_spans(inst.ji, cfg.head.l_ans);
    inst.slot_sets = slot_candidate_sets(inst.candidates, schema);
    inst.gold_intents.assign(intents_by_user_turn.begin(), intents_by_user_turn.begin() + u + 1);
    inst.gold_state = *states_by_user_turn[static_cast<size_t>(u)];
    for (const SlotDef& slot : schema.slots) inst.slot_names.push_back(slot.name);

    // Candidate index of each history span keyed by (start,end), for gold
    // span lookup.
    inst.gold_slot_targets.assign(schema.slots.size(), -1);
    for (size_t s = 0; s < schema.slots.size(); ++s) {
      const SlotDef& slot = schema.slots[s];
      const auto& subset = inst.slot_sets[s];
      auto it = inst.gold_state.slot_values.find(slot.name);
      if (it == inst.gold_state.slot_values.end()) {
        inst.gold_slot_targets[s] = 0;  // [NONE]
        continue;
      }
      const std::string& value = it->second;
      if (value == "dontcare") {
        inst.gold_slot_targets[s] = 1;  // [DONTCARE]
        continue;
      }
      if (slot.is_categorical) {
        int v = -1;
        for (size_t k = 0; k < slot.possible_values.size(); ++k)
          if (slot.possible_values[k] == value) v = static_cast<int>(k);
        if (v < 0)
          throw std::runtime_error("dialogue '" + dlg.dialogue_id + "': categorical slot '" +
                                   slot.name + "' has value '" + value +
                                   "' outside possible_values");
        inst.gold_slot_targets[s] = 2 + v;  // shared targets lead the subset
        continue;
      }
      // Extractive: earliest post-normalization occurrence in the history.
      std::vector<int> needle;
      for (const std::string& tok : tokenize(value)) needle.push_back(vocab.id(tok));
      const auto [gs, ge] = find_in_history(inst.ji, needle);
      if (gs < 0 || ge - gs + 1 > cfg.head.l_ans) {
        inst.reachable = false;
        inst.unreachable_slots.push_back(slot.name);
        continue;
      }
      int cand_idx = -1;
      for (size_t c = 0; c < inst.candidates.size(); ++c) {
        if (inst.candidates[c].tag == RegionTag::History && inst.candidates[c].start == gs &&
            inst.candidates[c].end == ge) {
          cand_idx = static_cast<int>(c);
          break;
        }
      }
      inst.gold_slot_targets[s] = subset_position_of_candidate(subset, cand_idx);
      if (inst.gold_slot_targets[s] < 0) {
        inst.reachable = false;
        inst.unreachable_slots.push_back(slot.name);
      }
    }
    out.push_back(std::move(inst));
  }
  return out;
}

ModelOutputs model_forward(ParamStore& params, const SplatConfig& cfg, const DstInstance& inst,
                           bool with_loss, Rng* dropout_rng) {
  ModelOutputs o;
  Tensor encoded = encode(inst.ji.token_ids, inst.ji.global_mask, cfg.encoder, params, dropout_rng);
  std::tie(o.h_utt, o.h_intent) = project_utterances_and_intents(
      encoded, inst.ji.utt_positions, inst.ji.intent_positions, params, cfg.head);
  o.h_slot = slot_query_representations(encoded, inst.ji.slot_positions, params, cfg.head);
  o.h_span = span_representations(encoded, inst.candidates, params, cfg.head);
  if (with_loss) {
    o.intent_term = intent_loss(o.h_utt, o.h_intent, inst.gold_intents);
    o.slot_term =
        slot_loss(o.h_slot, o.h_span, inst.slot_sets, inst.gold_slot_targets, inst.slot_names);
    o.loss = joint_loss(o.slot_term, o.intent_term);
  }
  return o;
}

DialogueState model_predict(ParamStore& params, const SplatConfig& cfg, const DstInstance& inst,
                            const ServiceSchema& schema, const Vocabulary& vocab) {
  ModelOutputs o = model_forward(params, cfg, inst, /*with_loss=*/false);
  return decode_state(o.h_utt, o.h_intent, o.h_slot, o.h_span, inst.ji, inst.candidates,
                      inst.slot_sets, schema, vocab);
}

}  // namespace splat
