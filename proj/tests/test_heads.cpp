#include <cmath>

#include "doctest.h"
#include "splat/grad_check.hpp"
#include "splat/model.hpp"
#include "splat/ops.hpp"

using namespace splat;

namespace {

SplatConfig toy_config() {
  SplatConfig cfg;
  cfg.encoder.n_layers = 1;
  cfg.encoder.d_model = 8;
  cfg.encoder.n_heads = 2;
  cfg.encoder.d_ff = 16;
  cfg.encoder.window_w = 8;
  cfg.encoder.max_seq_len = 128;
  cfg.encoder.dropout_rate = 0.0;
  cfg.head.d_model = 8;
  cfg.head.hidden_width = 12;
  cfg.head.l_ans = 30;
  return cfg;
}

ServiceSchema toy_schema() {
  ServiceSchema s;
  s.service_name = "travel_1";
  s.intents = {{"book_trip", "reserve a trip"}, {"find_trip", "look for a trip"}};
  s.slots = {{"to_location", "city to travel to", false, {}},
             {"has_luggage", "whether bags are checked", true, {"yes", "no"}}};
  return s;
}

Dialogue toy_dialogue() {
  Dialogue d;
  d.dialogue_id = "dlg_toy";
  d.service = "travel_1";
  DialogueTurn u1{Speaker::User, "book me a trip to long beach , ca", {}};
  u1.state.active_intent = "book_trip";
  u1.state.slot_values = {{"to_location", "long beach , ca"}};
  DialogueTurn s1{Speaker::System, "any bags ?", {}};
  DialogueTurn u2{Speaker::User, "yes checked bags please", {}};
  u2.state.active_intent = "book_trip";
  u2.state.slot_values = {{"to_location", "long beach , ca"}, {"has_luggage", "yes"}};
  d.turns = {u1, s1, u2};
  return d;
}

struct ToyFixture {
  SplatConfig cfg;
  ServiceSchema schema;
  Dialogue dlg;
  Vocabulary vocab;
  std::vector<DstInstance> instances;

  ToyFixture()
      : cfg(toy_config()),
        schema(toy_schema()),
        dlg(toy_dialogue()),
        vocab(Vocabulary::build(corpus_documents({schema}, {dlg}), 1)) {
    cfg.encoder.vocab_size = vocab.size();
    instances = build_instances(schema, dlg, vocab, cfg);
  }
};

// Plain log-softmax cross entropy, written independently of the ops library.
double ce_oracle(const std::vector<double>& scores, int gt) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  return std::log(sum) - (scores[static_cast<size_t>(gt)] - mx);
}

}  // namespace

TEST_CASE("head projections have the right shapes and degenerate behaviour") {
  HeadConfig hc;
  hc.d_model = 8;
  hc.hidden_width = 12;
  ParamStore params(1);
  init_head_params(params, hc);
  Rng rng(2);
  std::vector<double> ev(5 * 8);
  for (double& v : ev) v = rng.next_double() - 0.5;
  Tensor encoded = Tensor::from_values({5, 8}, ev);
  auto [h_utt, h_intent] = project_utterances_and_intents(encoded, {0, 2}, {1, 3, 4}, params, hc);
  CHECK(h_utt.shape() == std::vector<int>{2, 8});
  CHECK(h_intent.shape() == std::vector<int>{3, 8});

  // zero FFN weights: every row collapses to LN of the output bias
  for (int l = 0; l < hc.n_head_layers; ++l) {
    auto& w = params.at("heads.utt.l" + std::to_string(l) + ".w").mutable_values();
    std::fill(w.begin(), w.end(), 0.0);
  }
  auto [h0, hi0] = project_utterances_and_intents(encoded, {0, 2}, {1, 3}, params, hc);
  for (int j = 0; j < 8; ++j)
    CHECK(h0.values()[static_cast<size_t>(j)] ==
          doctest::Approx(h0.values()[static_cast<size_t>(8 + j)]));
}

TEST_CASE("intent_loss matches the direct formula") {
  Tensor h_utt = Tensor::from_values({1, 2}, {1, 0});
  Tensor h_intent = Tensor::from_values({2, 2}, {1, 0, 1, 0});  // equal scores
  CHECK(intent_loss(h_utt, h_intent, {0}).item() == doctest::Approx(std::log(2.0)));

  Tensor conf_utt = Tensor::from_values({1, 2}, {100, 0});
  Tensor conf_int = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  CHECK(intent_loss(conf_utt, conf_int, {0}).item() < 1e-10);

  Rng rng(5);
  std::vector<double> uv(3 * 4), iv(5 * 4);
  for (double& v : uv) v = rng.next_double() * 2 - 1;
  for (double& v : iv) v = rng.next_double() * 2 - 1;
  Tensor u = Tensor::from_values({3, 4}, uv);
  Tensor it = Tensor::from_values({5, 4}, iv);
  const std::vector<int> gold = {4, 0, 2};
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> scores(5);
    for (int j = 0; j < 5; ++j) {
      double s = 0.0;
      for (int c = 0; c < 4; ++c)
        s += uv[static_cast<size_t>(i * 4 + c)] * iv[static_cast<size_t>(j * 4 + c)];
      scores[static_cast<size_t>(j)] = s;
    }
    expect += ce_oracle(scores, gold[static_cast<size_t>(i)]);
  }
  CHECK(intent_loss(u, it, gold).item() == doctest::Approx(expect / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(intent_loss(u, it, {0, 1}), std::runtime_error);
}

TEST_CASE("enumerate_spans counts and membership") {
  ToyFixture fx;
  const JointInput& ji = fx.instances[0].ji;

  // formula cases frozen from hand enumeration
  CHECK(span_count_formula(4, 2) == 7);
  CHECK(span_count_formula(3, 30) == 6);

  auto cands = enumerate_spans(ji, 2);
  int shared = 0, hist = 0;
  for (const SpanCandidate& c : cands) {
    if (c.tag == RegionTag::SharedTarget) ++shared;
    if (c.tag == RegionTag::History) {
      ++hist;
      CHECK(c.start >= ji.history_region.first);
      CHECK(c.end < ji.history_region.second);
      CHECK(c.length() <= 2);
    }
  }
  CHECK(shared == 2);
  const int n = ji.history_region.second - ji.history_region.first;
  CHECK(hist == span_count_formula(n, 2));

  // categorical value spans carry their owning slot
  auto full = enumerate_spans(ji, 30);
  int cat = 0;
  for (const SpanCandidate& c : full)
    if (c.tag == RegionTag::CategoricalValue) {
      ++cat;
      CHECK(c.slot_index == 1);
    }
  CHECK(cat == 2);  // yes, no
}

TEST_CASE("candidate count formula holds for random (N, L_ans)") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const int n = rng.next_int(1, 128);
    const int l = rng.next_int(1, 30);
    int64_t direct = 0;
    for (int start = 0; start < n; ++start)
      for (int len = 1; len <= std::min(l, n - start); ++len) ++direct;
    CHECK(direct == span_count_formula(n, l));
  }
}

TEST_CASE("span representations depend only on endpoint rows") {
  HeadConfig hc;
  hc.d_model = 8;
  hc.hidden_width = 12;
  ParamStore params(3);
  init_head_params(params, hc);
  Rng rng(7);
  std::vector<double> ev(6 * 8);
  for (double& v : ev) v = rng.next_double() - 0.5;
  Tensor encoded = Tensor::from_values({6, 8}, ev);

  std::vector<SpanCandidate> cands = {{2, 2, RegionTag::History, -1, -1},
                                      {1, 4, RegionTag::History, -1, -1},
                                      {1, 4, RegionTag::History, -1, -1}};
  Tensor h = span_representations(encoded, cands, params, hc);
  CHECK(h.shape() == std::vector<int>{3, 8});
  for (int j = 0; j < 8; ++j)
    CHECK(h.values()[static_cast<size_t>(8 + j)] == h.values()[static_cast<size_t>(16 + j)]);

  // permuting interior rows (2,3) leaves the (1,4) span representation alone
  std::vector<double> permuted = ev;
  for (int c = 0; c < 8; ++c) std::swap(permuted[2 * 8 + c], permuted[3 * 8 + c]);
  Tensor h2 = span_representations(Tensor::from_values({6, 8}, permuted),
                                   {{1, 4, RegionTag::History, -1, -1}}, params, hc);
  for (int j = 0; j < 8; ++j)
    CHECK(h2.values()[static_cast<size_t>(j)] == h.values()[static_cast<size_t>(8 + j)]);

  // single-token span equals the [x_i ; x_i] duplication path
  Tensor single = span_representations(encoded, {{2, 2, RegionTag::History, -1, -1}}, params, hc);
  for (int j = 0; j < 8; ++j)
    CHECK(single.values()[static_cast<size_t>(j)] == h.values()[static_cast<size_t>(j)]);
}

TEST_CASE("slot losses match the direct formula and permutation equivariance") {
  Rng rng(8);
  const int n_span = 10, d = 6;
  std::vector<double> sp(n_span * d), sl(3 * d);
  for (double& v : sp) v = rng.next_double() * 2 - 1;
  for (double& v : sl) v = rng.next_double() * 2 - 1;
  Tensor h_span = Tensor::from_values({n_span, d}, sp);
  Tensor h_slot = Tensor::from_values({3, d}, sl);
  std::vector<std::vector<int>> sets = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9},
                                        {0, 1, 2, 3, 4, 5, 6, 7, 8, 9},
                                        {0, 1, 4, 5}};
  const std::vector<int> gold = {3, 7, 2};

  double expect = 0.0;
  for (int q = 0; q < 3; ++q) {
    std::vector<double> scores;
    for (int c : sets[static_cast<size_t>(q)]) {
      double s = 0.0;
      for (int k = 0; k < d; ++k)
        s += sl[static_cast<size_t>(q * d + k)] * sp[static_cast<size_t>(c * d + k)];
      scores.push_back(s);
    }
    expect += ce_oracle(scores, gold[static_cast<size_t>(q)]);
  }
  Tensor loss = slot_loss(h_slot, h_span, sets, gold, {"a", "b", "c"});
  CHECK(loss.item() == doctest::Approx(expect / 3.0).epsilon(1e-12));

  // permuting one slot's candidate set (and its gold) leaves the loss alone
  std::vector<std::vector<int>> permuted = sets;
  permuted[2] = {5, 0, 4, 1};
  std::vector<int> gold2 = gold;
  gold2[2] = 2;  // candidate 4 moved to position 2
  Tensor loss2 = slot_loss(h_slot, h_span, permuted, gold2, {"a", "b", "c"});
  CHECK(std::fabs(loss2.item() - loss.item()) < 1e-12);

  // equal scores over two candidates
  Tensor flat_slot = Tensor::from_values({1, 2}, {1, 0});
  Tensor flat_span = Tensor::from_values({2, 2}, {1, 0, 1, 0});
  CHECK(slot_loss(flat_slot, flat_span, {{0, 1}}, {0}, {"s"}).item() ==
        doctest::Approx(std::log(2.0)));

  // dominating gold score
  Tensor big_slot = Tensor::from_values({1, 2}, {100, 0});
  Tensor big_span = Tensor::from_values({2, 2}, {1, 0, -1, 0});
  CHECK(slot_loss(big_slot, big_span, {{0, 1}}, {0}, {"s"}).item() < 1e-10);

  CHECK_THROWS_WITH_AS(slot_loss(h_slot, h_span, sets, {3, -1, 2}, {"a", "bad_slot", "c"}),
                       doctest::Contains("bad_slot"), std::runtime_error);
}

TEST_CASE("score shift invariance of a slot's candidate distribution") {
  Rng rng(9);
  const int d = 4;
  std::vector<double> sp(6 * d), sl(d);
  for (double& v : sp) v = rng.next_double();
  for (double& v : sl) v = rng.next_double();
  std::vector<double> scores(6), shifted(6);
  for (int c = 0; c < 6; ++c) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += sl[static_cast<size_t>(k)] * sp[static_cast<size_t>(c * d + k)];
    scores[static_cast<size_t>(c)] = s;
    shifted[static_cast<size_t>(c)] = s + 42.0;
  }
  Tensor p1 = softmax(Tensor::from_values({6}, scores), 0);
  Tensor p2 = softmax(Tensor::from_values({6}, shifted), 0);
  int arg1 = 0, arg2 = 0;
  for (int c = 0; c < 6; ++c) {
    if (scores[static_cast<size_t>(c)] > scores[static_cast<size_t>(arg1)]) arg1 = c;
    if (shifted[static_cast<size_t>(c)] > shifted[static_cast<size_t>(arg2)]) arg2 = c;
    CHECK(std::fabs(p1.values()[static_cast<size_t>(c)] - p2.values()[static_cast<size_t>(c)]) <
          1e-10);
  }
  CHECK(arg1 == arg2);
}

TEST_CASE("joint loss is the arithmetic mean") {
  CHECK(joint_loss(Tensor::scalar(1.0), Tensor::scalar(0.5)).item() == doctest::Approx(0.75));
  CHECK(joint_loss(Tensor::scalar(0.0), Tensor::scalar(0.0)).item() == doctest::Approx(0.0));
  Rng rng(10);
  for (int t = 0; t < 5; ++t) {
    const double a = rng.next_double(), b = rng.next_double();
    CHECK(joint_loss(Tensor::scalar(a), Tensor::scalar(b)).item() ==
          doctest::Approx((a + b) / 2.0));
  }
  CHECK_THROWS_AS(joint_loss(Tensor::scalar(std::nan("")), Tensor::scalar(0.0)),
                  std::runtime_error);
}

TEST_CASE("gold resolution over a toy dialogue") {
  ToyFixture fx;
  REQUIRE(fx.instances.size() == 2);
  const DstInstance& first = fx.instances[0];
  CHECK(first.gold_intents == std::vector<int>{0});
  CHECK(first.reachable);
  // to_location -> earliest "long beach , ca" span; has_luggage unset -> [NONE]
  CHECK(first.gold_slot_targets[1] == 0);
  const int t0 = first.gold_slot_targets[0];
  REQUIRE(t0 >= 2);
  const SpanCandidate& c = first.candidates[static_cast<size_t>(first.slot_sets[0][static_cast<size_t>(t0)])];
  CHECK(c.tag == RegionTag::History);
  std::vector<int> span(first.ji.token_ids.begin() + c.start,
                        first.ji.token_ids.begin() + c.end + 1);
  CHECK(detokenize(span, fx.vocab) == "long beach , ca");

  const DstInstance& second = fx.instances[1];
  CHECK(second.gold_intents == std::vector<int>{0, 0});
  CHECK(second.gold_slot_targets[1] == 2);  // categorical "yes" = first value span
}

TEST_CASE("unreachable extractive gold flags the instance") {
  ToyFixture fx;
  Dialogue d = fx.dlg;
  d.turns[0].state.slot_values["to_location"] = "atlantis";
  d.turns[2].state.slot_values["to_location"] = "atlantis";
  auto instances = build_instances(fx.schema, d, fx.vocab, fx.cfg);
  CHECK(!instances[0].reachable);
  CHECK(instances[0].unreachable_slots == std::vector<std::string>{"to_location"});
  CHECK(instances[0].gold_slot_targets[0] == -1);
}

TEST_CASE("decode_state maps candidate kinds to state entries") {
  ToyFixture fx;
  const DstInstance& inst = fx.instances[1];
  const int d = 4;
  const int n_cand = static_cast<int>(inst.candidates.size());

  // rig representations directly: h_span rows + slot queries
  std::vector<double> span_v(static_cast<size_t>(n_cand) * d, 0.0);
  std::vector<double> slot_v(2 * d, 0.0);
  std::vector<double> utt_v(static_cast<size_t>(inst.ji.utt_positions.size()) * d, 0.0);
  std::vector<double> intent_v(3 * d, 0.0);

  // find the "long beach , ca" candidate within its subset
  const int gold0 = inst.gold_slot_targets[0];
  const int cand0 = inst.slot_sets[0][static_cast<size_t>(gold0)];
  // slot 0 query keys on dim 0, rigged candidate has +1 there
  slot_v[0] = 1.0;
  span_v[static_cast<size_t>(cand0) * d + 0] = 1.0;
  // slot 1 query keys on dim 1; point it at [NONE] (candidate 0)
  slot_v[static_cast<size_t>(d) + 1] = 1.0;
  span_v[0 * d + 1] = 1.0;
  // final utterance keys on dim 2; make the NONE intent (row 2) win
  utt_v[(inst.ji.utt_positions.size() - 1) * d + 2] = 1.0;
  intent_v[2 * d + 2] = 5.0;

  DialogueState st = decode_state(
      Tensor::from_values({static_cast<int>(inst.ji.utt_positions.size()), d}, utt_v),
      Tensor::from_values({3, d}, intent_v), Tensor::from_values({2, d}, slot_v),
      Tensor::from_values({n_cand, d}, span_v), inst.ji, inst.candidates, inst.slot_sets,
      fx.schema, fx.vocab);
  CHECK(st.active_intent == "NONE");
  CHECK(st.slot_values.at("to_location") == "long beach , ca");
  CHECK(st.slot_values.count("has_luggage") == 0);

  // all-zero scores tie everywhere: lowest candidate index wins, i.e. [NONE]
  DialogueState ties = decode_state(
      Tensor::from_values({static_cast<int>(inst.ji.utt_positions.size()), d},
                          std::vector<double>(utt_v.size(), 0.0)),
      Tensor::from_values({3, d}, std::vector<double>(intent_v.size(), 0.0)),
      Tensor::from_values({2, d}, std::vector<double>(slot_v.size(), 0.0)),
      Tensor::from_values({n_cand, d}, std::vector<double>(span_v.size(), 0.0)), inst.ji,
      inst.candidates, inst.slot_sets, fx.schema, fx.vocab);
  CHECK(ties.slot_values.empty());
  CHECK(ties.active_intent == fx.schema.intents[0].name);

  // dontcare via shared target 1
  std::vector<double> slot_dc(slot_v.size(), 0.0);
  std::vector<double> span_dc(span_v.size(), 0.0);
  slot_dc[0] = 1.0;
  span_dc[1 * d + 0] = 1.0;  // candidate 1 = [DONTCARE]
  DialogueState dc = decode_state(
      Tensor::from_values({static_cast<int>(inst.ji.utt_positions.size()), d}, utt_v),
      Tensor::from_values({3, d}, intent_v), Tensor::from_values({2, d}, slot_dc),
      Tensor::from_values({n_cand, d}, span_dc), inst.ji, inst.candidates, inst.slot_sets,
      fx.schema, fx.vocab);
  CHECK(dc.slot_values.at("to_location") == "dontcare");
}

TEST_CASE("decoded categorical values always come from possible_values") {
  ToyFixture fx;
  Rng rng(31);
  const DstInstance& inst = fx.instances[1];
  ParamStore params(rng.next_u64());
  init_model_params(params, fx.cfg);
  DialogueState st = model_predict(params, fx.cfg, inst, fx.schema, fx.vocab);
  auto it = st.slot_values.find("has_luggage");
  if (it != st.slot_values.end()) {
    const bool ok = it->second == "yes" || it->second == "no" || it->second == "dontcare";
    CHECK(ok);
  }
}

TEST_CASE("end-to-end gradient check through encoder and heads") {
  ToyFixture fx;
  ParamStore params(11);
  init_model_params(params, fx.cfg);
  const DstInstance& inst = fx.instances[1];
  auto f = [&](ParamStore& p) { return model_forward(p, fx.cfg, inst, true).loss; };
  // The head LayerNorms sit in a high-curvature regime at init, so the probe
  // needs a small eps; the floor absorbs float64 roundoff on near-zero coords.
  GradCheckResult r = grad_check(params, f, 3e-6, 250, 12, /*denom_floor=*/1e-5);
  CHECK(r.max_rel_err < 1e-4);
}
