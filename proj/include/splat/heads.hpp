#pragma once

#include <string>
#include <utility>
#include <vector>

#include "splat/joint_input.hpp"
#include "splat/param_store.hpp"
#include "splat/tensor.hpp"

namespace splat {

struct HeadConfig {
  int l_ans = 30;  // maximum candidate span length in tokens
  int d_model = 64;
  int hidden_width = 128;
  int n_head_layers = 2;
  void validate() const;
};

enum class RegionTag { History, SharedTarget, CategoricalValue };

// A candidate (start,end) token span. Shared targets are the single-token
// [NONE]/[DONTCARE] spans; categorical value spans are offered only to their
// owning slot's query.
struct SpanCandidate {
  int start = 0;
  int end = 0;  // inclusive
  RegionTag tag = RegionTag::History;
  int slot_index = -1;   // categorical values: owning slot
  int value_index = -1;  // categorical values: position in possible_values

  int length() const { return end - start + 1; }
};

void init_head_params(ParamStore& params, const HeadConfig& cfg);

// Utterance and intent encoders: h = LN(FFN(x)) applied per recorded [UTT]
// and [INTENT] position, with separate parameter sets.
std::pair<Tensor, Tensor> project_utterances_and_intents(const Tensor& encoded,
                                                         const std::vector<int>& utt_positions,
                                                         const std::vector<int>& intent_positions,
                                                         ParamStore& params,
                                                         const HeadConfig& cfg);

// Mean over utterance pairs of cross-entropy between dot-product scores and
// the gold intent.
Tensor intent_loss(const Tensor& h_utt, const Tensor& h_intent,
                   const std::vector<int>& gold_intents);

// Shared targets first, then every history span of length <= l_ans, then each
// categorical slot's recorded value spans.
std::vector<SpanCandidate> enumerate_spans(const JointInput& ji, int l_ans);

// Candidate count of an unrestricted region of length n under the cap.
int64_t span_count_formula(int n, int l_ans);

// Span encoder: endpoints concatenated, then n_head_layers of
// {affine, GeLU, LayerNorm}.
Tensor span_representations(const Tensor& encoded, const std::vector<SpanCandidate>& candidates,
                            ParamStore& params, const HeadConfig& cfg);

// Slot query encoder over the [SLOT] positions; parameters distinct from the
// span encoder.
Tensor slot_query_representations(const Tensor& encoded, const std::vector<int>& slot_positions,
                                  ParamStore& params, const HeadConfig& cfg);

// Per-slot permitted candidate subsets (ascending candidate indices):
// non-categorical slots score the shared targets plus all history spans,
// categorical slots the shared targets plus their own value spans.
std::vector<std::vector<int>> slot_candidate_sets(const std::vector<SpanCandidate>& candidates,
                                                  const ServiceSchema& schema);

// Mean over slots of cross-entropy over each slot's permitted candidate set.
// gold_targets holds each slot's subset position; -1 marks an unresolvable
// gold and raises.
Tensor slot_loss(const Tensor& h_slot, const Tensor& h_span,
                 const std::vector<std::vector<int>>& slot_sets,
                 const std::vector<int>& gold_targets,
                 const std::vector<std::string>& slot_names);

// (slot + intent) / 2
Tensor joint_loss(const Tensor& slot_term, const Tensor& intent_term);

// Greedy decoding: argmax intent for the final [UTT]; per slot the argmax
// candidate, mapped to absent / "dontcare" / detokenized history text /
// canonical categorical value. Ties break toward the lowest candidate index.
DialogueState decode_state(const Tensor& h_utt, const Tensor& h_intent, const Tensor& h_slot,
                           const Tensor& h_span, const JointInput& ji,
                           const std::vector<SpanCandidate>& candidates,
                           const std::vector<std::vector<int>>& slot_sets,
                           const ServiceSchema& schema, const Vocabulary& vocab);

}  // namespace splat
