#pragma once

#include <string>
#include <vector>

#include "splat/encoder.hpp"
#include "splat/heads.hpp"
#include "splat/joint_input.hpp"

namespace splat {

struct SplatConfig {
  EncoderConfig encoder;
  HeadConfig head;
  void validate() const {
    encoder.validate();
    head.validate();
    if (encoder.d_model != head.d_model)
      throw std::runtime_error("config: encoder and head d_model disagree");
  }
};

void init_model_params(ParamStore& params, const SplatConfig& cfg);

// One training/evaluation example: a dialogue prefix up to a user turn,
// encoded against one service, with pre-resolved gold targets.
struct DstInstance {
  std::string dialogue_id;
  std::string service_name;
  int turn_index = 0;  // user-turn ordinal within the dialogue
  JointInput ji;
  std::vector<SpanCandidate> candidates;
  std::vector<std::vector<int>> slot_sets;
  std::vector<std::string> slot_names;
  std::vector<int> gold_intents;       // per [UTT] pair, index into K+1
  std::vector<int> gold_slot_targets;  // per slot, subset position; -1 unresolved
  DialogueState gold_state;
  bool reachable = true;  // all slot golds resolved
  std::vector<std::string> unreachable_slots;
};

// One instance per user turn (cumulative-state prefixes). Throws on unknown
// intent names or categorical values outside possible_values; extractive
// values missing from the history only flag the instance.
std::vector<DstInstance> build_instances(const ServiceSchema& schema, const Dialogue& dlg,
                                         const Vocabulary& vocab, const SplatConfig& cfg);

struct ModelOutputs {
  Tensor h_utt, h_intent, h_slot, h_span;
  Tensor intent_term, slot_term, loss;
};

// Encode + all heads. Loss terms are produced only when with_loss (training
// requires every slot gold to be resolved).
ModelOutputs model_forward(ParamStore& params, const SplatConfig& cfg, const DstInstance& inst,
                           bool with_loss, Rng* dropout_rng = nullptr);

DialogueState model_predict(ParamStore& params, const SplatConfig& cfg, const DstInstance& inst,
                            const ServiceSchema& schema, const Vocabulary& vocab);

}  // namespace splat
