#include "splat/heads.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "splat/ops.hpp"

namespace splat {

void HeadConfig::validate() const {
  if (l_ans < 1) throw std::runtime_error("head config: l_ans must be >= 1");
  if (d_model < 1 || hidden_width < 1) throw std::runtime_error("head config: zero width");
  if (n_head_layers < 1) throw std::runtime_error("head config: n_head_layers must be >= 1");
}

namespace {

std::string lp(const std::string& head, int layer, const char* name) {
  return "heads." + head + ".l" + std::to_string(layer) + "." + name;
}

void create_mlp(ParamStore& p, const std::string& head, int in_dim, const HeadConfig& cfg,
                bool per_layer_ln) {
  for (int l = 0; l < cfg.n_head_layers; ++l) {
    const int din = l == 0 ? in_dim : cfg.hidden_width;
    const int dout = l == cfg.n_head_layers - 1 ? cfg.d_model : cfg.hidden_width;
    p.create(lp(head, l, "w"), {din, dout}, Init::TruncNormal);
    p.create(lp(head, l, "b"), {dout}, Init::Zeros);
    if (per_layer_ln) {
      p.create(lp(head, l, "ln.gain"), {dout}, Init::Ones);
      p.create(lp(head, l, "ln.bias"), {dout}, Init::Zeros);
    }
  }
  if (!per_layer_ln) {
    p.create("heads." + head + ".ln.gain", {cfg.d_model}, Init::Ones);
    p.create("heads." + head + ".ln.bias", {cfg.d_model}, Init::Zeros);
  }
}

// LN(FFN(x)): GeLU between layers, one LayerNorm on the output.
Tensor mlp_final_ln(const Tensor& x, const std::string& head, ParamStore& p,
                    const HeadConfig& cfg) {
  Tensor h = x;
  for (int l = 0; l < cfg.n_head_layers; ++l) {
    h = affine(h, p.at(lp(head, l, "w")), p.at(lp(head, l, "b")));
    if (l + 1 < cfg.n_head_layers) h = gelu(h);
  }
  return layer_norm(h, p.at("heads." + head + ".ln.gain"), p.at("heads." + head + ".ln.bias"));
}

// n_head_layers of LN(GeLU(affine(x))).
Tensor mlp_per_layer_ln(const Tensor& x, const std::string& head, ParamStore& p,
                        const HeadConfig& cfg) {
  Tensor h = x;
  for (int l = 0; l < cfg.n_head_layers; ++l) {
    h = layer_norm(gelu(affine(h, p.at(lp(head, l, "w")), p.at(lp(head, l, "b")))),
                   p.at(lp(head, l, "ln.gain")), p.at(lp(head, l, "ln.bias")));
  }
  return h;
}

}  // namespace

void init_head_params(ParamStore& p, const HeadConfig& cfg) {
  cfg.validate();
  create_mlp(p, "utt", cfg.d_model, cfg, /*per_layer_ln=*/false);
  create_mlp(p, "intent", cfg.d_model, cfg, /*per_layer_ln=*/false);
  create_mlp(p, "span", 2 * cfg.d_model, cfg, /*per_layer_ln=*/true);
  create_mlp(p, "slot", cfg.d_model, cfg, /*per_layer_ln=*/true);
}

std::pair<Tensor, Tensor> project_utterances_and_intents(const Tensor& encoded,
                                                         const std::vector<int>& utt_positions,
                                                         const std::vector<int>& intent_positions,
                                                         ParamStore& params,
                                                         const HeadConfig& cfg) {
  Tensor h_utt = mlp_final_ln(gather_rows(encoded, utt_positions), "utt", params, cfg);
  Tensor h_intent = mlp_final_ln(gather_rows(encoded, intent_positions), "intent", params, cfg);
  return {h_utt, h_intent};
}

Tensor intent_loss(const Tensor& h_utt, const Tensor& h_intent,
                   const std::vector<int>& gold_intents) {
  if (gold_intents.size() != static_cast<size_t>(h_utt.dim(0)))
    throw std::runtime_error("intent_loss: " + std::to_string(gold_intents.size()) +
                             " gold intents for " + std::to_string(h_utt.dim(0)) +
                             " utterance pairs");
  return cross_entropy_rows(matmul_nt(h_utt, h_intent), gold_intents);
}

int64_t span_count_formula(int n, int l_ans) {
  int64_t c = 0;
  for (int i = 1; i <= n; ++i) c += std::min(l_ans, n - i + 1);
  return c;
}

std::vector<SpanCandidate> enumerate_spans(const JointInput& ji, int l_ans) {
  if (l_ans < 1) throw std::runtime_error("enumerate_spans: l_ans must be >= 1");
  std::vector<SpanCandidate> out;
  out.push_back({ji.none_position(), ji.none_position(), RegionTag::SharedTarget, -1, -1});
  out.push_back({ji.dontcare_position(), ji.dontcare_position(), RegionTag::SharedTarget, -1, -1});
  const auto [hs, he] = ji.history_region;
  for (int start = hs; start < he; ++start) {
    const int max_len = std::min(l_ans, he - start);
    for (int len = 1; len <= max_len; ++len)
      out.push_back({start, start + len - 1, RegionTag::History, -1, -1});
  }
  for (size_t s = 0; s < ji.slot_value_regions.size(); ++s) {
    for (size_t v = 0; v < ji.slot_value_regions[s].size(); ++v) {
      const auto [a, b] = ji.slot_value_regions[s][v];
      if (b - a + 1 > l_ans)
        throw std::runtime_error("enumerate_spans: categorical value span of length " +
                                 std::to_string(b - a + 1) + " exceeds l_ans " +
                                 std::to_string(l_ans));
      out.push_back({a, b, RegionTag::CategoricalValue, static_cast<int>(s), static_cast<int>(v)});
    }
  }
  return out;
}

Tensor span_representations(const Tensor& encoded, const std::vector<SpanCandidate>& candidates,
                            ParamStore& params, const HeadConfig& cfg) {
  std::vector<int> starts, ends;
  starts.reserve(candidates.size());
  ends.reserve(candidates.size());
  for (const SpanCandidate& c : candidates) {
    starts.push_back(c.start);
    ends.push_back(c.end);
  }
  Tensor y = concat_cols(gather_rows(encoded, starts), gather_rows(encoded, ends));
  return mlp_per_layer_ln(y, "span", params, cfg);
}

Tensor slot_query_representations(const Tensor& encoded, const std::vector<int>& slot_positions,
                                  ParamStore& params, const HeadConfig& cfg) {
  return mlp_per_layer_ln(gather_rows(encoded, slot_positions), "slot", params, cfg);
}

std::vector<std::vector<int>> slot_candidate_sets(const std::vector<SpanCandidate>& candidates,
                                                  const ServiceSchema& schema) {
  std::vector<int> shared_and_history;
  std::vector<std::vector<int>> per_slot_values(schema.slots.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    const SpanCandidate& c = candidates[i];
    switch (c.tag) {
      case RegionTag::SharedTarget:
      case RegionTag::History:
        shared_and_history.push_back(static_cast<int>(i));
        break;
      case RegionTag::CategoricalValue:
        per_slot_values[static_cast<size_t>(c.slot_index)].push_back(static_cast<int>(i));
        break;
    }
  }
  std::vector<std::vector<int>> sets(schema.slots.size());
  for (size_t s = 0; s < schema.slots.size(); ++s) {
    if (schema.slots[s].is_categorical) {
      sets[s] = {0, 1};  // shared targets always lead the subset
      sets[s].insert(sets[s].end(), per_slot_values[s].begin(), per_slot_values[s].end());
    } else {
      sets[s] = shared_and_history;
    }
  }
  return sets;
}

Tensor slot_loss(const Tensor& h_slot, const Tensor& h_span,
                 const std::vector<std::vector<int>>& slot_sets,
                 const std::vector<int>& gold_targets,
                 const std::vector<std::string>& slot_names) {
  const size_t n_slots = slot_sets.size();
  if (gold_targets.size() != n_slots)
    throw std::runtime_error("slot_loss: " + std::to_string(gold_targets.size()) +
                             " gold targets for " + std::to_string(n_slots) + " slots");
  if (n_slots == 0) throw std::runtime_error("slot_loss: no slots");
  for (size_t s = 0; s < n_slots; ++s)
    if (gold_targets[s] < 0 || gold_targets[s] >= static_cast<int>(slot_sets[s].size()))
      throw std::runtime_error("slot_loss: slot '" +
                               (s < slot_names.size() ? slot_names[s] : std::to_string(s)) +
                               "' has no resolvable gold candidate");

  // Slots sharing one candidate set (all non-categorical ones do) are scored
  // in a single gather + matmul.
  std::map<std::vector<int>, std::vector<int>> groups;
  for (size_t s = 0; s < n_slots; ++s) groups[slot_sets[s]].push_back(static_cast<int>(s));

  Tensor total;
  for (const auto& [set, slots] : groups) {
    Tensor scores = matmul_nt(gather_rows(h_slot, slots), gather_rows(h_span, set));
    std::vector<int> golds;
    golds.reserve(slots.size());
    for (int s : slots) golds.push_back(gold_targets[static_cast<size_t>(s)]);
    Tensor part = scale(cross_entropy_rows(scores, golds), static_cast<double>(slots.size()));
    total = total.defined() ? add(total, part) : part;
  }
  return scale(total, 1.0 / static_cast<double>(n_slots));
}

Tensor joint_loss(const Tensor& slot_term, const Tensor& intent_term) {
  if (!std::isfinite(slot_term.item()) || !std::isfinite(intent_term.item()))
    throw std::runtime_error("joint_loss: non-finite component");
  return scale(add(slot_term, intent_term), 0.5);
}

namespace {

int argmax_dot(const std::vector<double>& query, const Tensor& rows,
               const std::vector<int>& subset) {
  const int d = rows.dim(1);
  int best = 0;
  double best_score = 0.0;
  for (size_t a = 0; a < subset.size(); ++a) {
    const double* r = rows.values().data() + static_cast<size_t>(subset[a]) * d;
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += query[static_cast<size_t>(c)] * r[c];
    if (a == 0 || s > best_score) {
      best = static_cast<int>(a);
      best_score = s;
    }
  }
  return best;
}

}  // namespace

DialogueState decode_state(const Tensor& h_utt, const Tensor& h_intent, const Tensor& h_slot,
                           const Tensor& h_span, const JointInput& ji,
                           const std::vector<SpanCandidate>& candidates,
                           const std::vector<std::vector<int>>& slot_sets,
                           const ServiceSchema& schema, const Vocabulary& vocab) {
  DialogueState state;
  const int d = h_utt.dim(1);
  const int n_utt = h_utt.dim(0);
  std::vector<double> last_utt(h_utt.values().begin() + static_cast<size_t>(n_utt - 1) * d,
                               h_utt.values().begin() + static_cast<size_t>(n_utt) * d);
  std::vector<int> all_intents(static_cast<size_t>(h_intent.dim(0)));
  for (size_t j = 0; j < all_intents.size(); ++j) all_intents[j] = static_cast<int>(j);
  const int best_intent = argmax_dot(last_utt, h_intent, all_intents);
  state.active_intent = best_intent == static_cast<int>(schema.intents.size())
                            ? kNoneIntentName
                            : schema.intents[static_cast<size_t>(best_intent)].name;

  for (size_t s = 0; s < slot_sets.size(); ++s) {
    std::vector<double> q(h_slot.values().begin() + s * static_cast<size_t>(d),
                          h_slot.values().begin() + (s + 1) * static_cast<size_t>(d));
    const int pick = argmax_dot(q, h_span, slot_sets[s]);
    const SpanCandidate& c = candidates[static_cast<size_t>(slot_sets[s][static_cast<size_t>(pick)])];
    const std::string& name = schema.slots[s].name;
    switch (c.tag) {
      case RegionTag::SharedTarget:
        if (c.start == ji.dontcare_position()) state.slot_values[name] = "dontcare";
        break;  // [NONE] leaves the slot absent
      case RegionTag::History: {
        std::vector<int> span(ji.token_ids.begin() + c.start, ji.token_ids.begin() + c.end + 1);
        state.slot_values[name] = detokenize(span, vocab);
        break;
      }
      case RegionTag::CategoricalValue:
        state.slot_values[name] =
            schema.slots[static_cast<size_t>(c.slot_index)].possible_values[static_cast<size_t>(c.value_index)];
        break;
    }
  }
  return state;
}

}  // namespace splat
