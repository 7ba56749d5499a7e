#include <cmath>
#include <map>

#include "doctest.h"
#include "splat/encoder.hpp"
#include "splat/ops.hpp"
#include "splat/rss.hpp"
#include "splat/vocab.hpp"

using namespace splat;

namespace {

std::vector<int> ids(const std::string& text, const Vocabulary& v) {
  std::vector<int> out;
  for (const std::string& t : tokenize(text)) out.push_back(v.id(t));
  return out;
}

// Exhaustive n-gram scan: every surface of the given length range with at
// least two disjoint occurrences, selected left to right.
std::map<std::vector<int>, int> exhaustive_recurring(const std::vector<int>& toks, int min_len,
                                                     int max_len) {
  std::map<std::vector<int>, int> counts;
  const int n = static_cast<int>(toks.size());
  for (int len = min_len; len <= std::min(max_len, n); ++len) {
    std::map<std::vector<int>, int> next_free;
    std::map<std::vector<int>, int> c;
    for (int s = 0; s + len <= n; ++s) {
      std::vector<int> key(toks.begin() + s, toks.begin() + s + len);
      auto it = next_free.find(key);
      if (it == next_free.end() || s >= it->second) {
        ++c[key];
        next_free[key] = s + len;
      }
    }
    for (auto& [k, v] : c)
      if (v >= 2) counts[k] = v;
  }
  return counts;
}

double ce_oracle(const std::vector<double>& scores, int gt) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  return std::log(sum) - (scores[static_cast<size_t>(gt)] - mx);
}

}  // namespace

TEST_CASE("recurring spans: longest wins on aligned repeats") {
  Vocabulary v = Vocabulary::build({"a b c"}, 1);
  const std::vector<int> toks = ids("a b c a b c", v);
  auto clusters = find_recurring_spans(toks, 2, 10);
  // exhaustive scan agrees the only maximal surface is the full trigram
  auto scan = exhaustive_recurring(toks, 2, 10);
  CHECK(scan.count(ids("a b c", v)) == 1);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].surface == ids("a b c", v));
  CHECK(clusters[0].occurrences ==
        std::vector<std::pair<int, int>>{{0, 2}, {3, 5}});
}

TEST_CASE("recurring spans: all-distinct tokens give nothing") {
  Vocabulary v = Vocabulary::build({"p q r s t"}, 1);
  CHECK(find_recurring_spans(ids("p q r s t", v), 1, 10).empty());
}

TEST_CASE("recurring spans: repeated single token keeps all four occurrences") {
  Vocabulary v = Vocabulary::build({"x"}, 1);
  const std::vector<int> toks = ids("x x x x", v);
  auto clusters = find_recurring_spans(toks, 1, 10);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].surface.size() == 1);
  CHECK(clusters[0].occurrences.size() == 4);
  // occurrences are disjoint
  for (size_t i = 1; i < clusters[0].occurrences.size(); ++i)
    CHECK(clusters[0].occurrences[i].first > clusters[0].occurrences[i - 1].second);
}

TEST_CASE("recurring spans: stopword-only single tokens are excluded") {
  Vocabulary v = Vocabulary::build({"the cat sat on the mat near the door"}, 1);
  std::unordered_set<int> stops;
  for (const char* w : rss_stopwords())
    if (v.contains(w)) stops.insert(v.id(w));
  const std::vector<int> toks = ids("the cat sat on the mat near the door", v);
  auto clusters = find_recurring_spans(toks, 1, 10, &stops);
  for (const SpanCluster& c : clusters)
    CHECK(!(c.surface.size() == 1 && stops.count(c.surface[0])));
  // without the exclusion "the" x3 is found
  auto all = find_recurring_spans(toks, 1, 10);
  bool found_the = false;
  for (const SpanCluster& c : all)
    if (c.surface == ids("the", v) && c.occurrences.size() == 3) found_the = true;
  CHECK(found_the);
}

TEST_CASE("recurring spans agree with the exhaustive scan on random corpora") {
  Rng rng(17);
  Vocabulary v = Vocabulary::build({"t0 t1 t2 t3 t4 t5"}, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.next_int(2, 40);
    std::vector<int> toks(static_cast<size_t>(n));
    for (int& t : toks) t = v.id("t" + std::to_string(rng.next_int(0, 5)));
    auto clusters = find_recurring_spans(toks, 1, 10);
    auto scan = exhaustive_recurring(toks, 1, 10);
    std::vector<uint8_t> claimed(static_cast<size_t>(n), 0);
    for (const SpanCluster& c : clusters) {
      CHECK(c.occurrences.size() >= 2);
      CHECK(scan.count(c.surface) == 1);  // every cluster is a real recurring surface
      for (const auto& [s, e] : c.occurrences) {
        // occurrences match the surface and never overlap across clusters
        for (int k = s; k <= e; ++k) {
          CHECK(toks[static_cast<size_t>(k)] == c.surface[static_cast<size_t>(k - s)]);
          CHECK(claimed[static_cast<size_t>(k)] == 0);
          claimed[static_cast<size_t>(k)] = 1;
        }
      }
    }
  }
}

TEST_CASE("select_and_mask: single pair cluster gives one query") {
  Vocabulary v = Vocabulary::build({"a b x y"}, 1);
  const std::vector<int> toks = ids("a b x a b y", v);
  auto clusters = find_recurring_spans(toks, 2, 10);
  REQUIRE(clusters.size() == 1);
  Rng rng(0);
  RssInstance inst = select_and_mask(clusters, toks, rng);
  CHECK(inst.queries.size() == 1);
  CHECK(inst.cluster_queries.size() == 1);
  CHECK(inst.occurrence_total == 2);
  // masked length: original - masked occurrence length + one [SLOT]
  CHECK(inst.tokens.size() == toks.size() - 2 + 1);
  // gold span carries the surviving surface
  const auto [gs, ge] = inst.cluster_gold[0];
  CHECK(ge - gs + 1 == 2);
  CHECK(inst.tokens[static_cast<size_t>(gs)] == v.id("a"));
  CHECK(inst.tokens[static_cast<size_t>(ge)] == v.id("b"));
  CHECK(inst.tokens[static_cast<size_t>(inst.queries[0].position)] == Vocabulary::kSlot);
}

TEST_CASE("select_and_mask: occurrence budget admits at most one large cluster") {
  // two synthetic clusters with 20 and 15 occurrences over a long sequence
  std::vector<int> toks(400, 9);
  SpanCluster a, b;
  a.surface = {10};
  b.surface = {11};
  for (int i = 0; i < 20; ++i) a.occurrences.emplace_back(i * 2, i * 2);
  for (int i = 0; i < 15; ++i) b.occurrences.emplace_back(100 + i * 2, 100 + i * 2);
  for (const auto& [s, e] : a.occurrences) toks[static_cast<size_t>(s)] = 10;
  for (const auto& [s, e] : b.occurrences) toks[static_cast<size_t>(s)] = 11;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(static_cast<uint64_t>(seed));
    RssInstance inst = select_and_mask({a, b}, toks, rng);
    CHECK(inst.cluster_queries.size() == 1);
    CHECK(inst.occurrence_total <= 30);
  }
}

TEST_CASE("select_and_mask is deterministic under a fixed seed") {
  Rng corpus_rng(23);
  Vocabulary v = Vocabulary::build({"w0 w1 w2 w3"}, 1);
  std::vector<int> toks;
  for (int i = 0; i < 60; ++i) toks.push_back(v.id("w" + std::to_string(corpus_rng.next_int(0, 3))));
  auto clusters = find_recurring_spans(toks, 1, 6);
  Rng r1(99), r2(99);
  RssInstance a = select_and_mask(clusters, toks, r1);
  RssInstance b = select_and_mask(clusters, toks, r2);
  CHECK(a.tokens == b.tokens);
  CHECK(a.occurrence_total == b.occurrence_total);
  REQUIRE(a.queries.size() == b.queries.size());
  for (size_t i = 0; i < a.queries.size(); ++i) {
    CHECK(a.queries[i].position == b.queries[i].position);
    CHECK(a.queries[i].gold_start == b.queries[i].gold_start);
    CHECK(a.queries[i].gold_end == b.queries[i].gold_end);
  }
}

TEST_CASE("masking invariants over many random corpora") {
  Rng rng(31);
  Vocabulary v = Vocabulary::build({"u0 u1 u2 u3 u4 u5 u6 u7"}, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.next_int(4, 80);
    std::vector<int> toks(static_cast<size_t>(n));
    for (int& t : toks) t = v.id("u" + std::to_string(rng.next_int(0, 7)));
    auto clusters = find_recurring_spans(toks, 1, 8);
    Rng mask_rng(rng.next_u64());
    RssInstance inst = select_and_mask(clusters, toks, mask_rng);

    CHECK(inst.occurrence_total <= 30);
    // query count equals masked occurrence count
    int masked_occ = 0;
    for (size_t c = 0; c < inst.cluster_queries.size(); ++c) {
      masked_occ += static_cast<int>(inst.cluster_queries[c].size());
      CHECK(!inst.cluster_queries[c].empty());  // at least one query per cluster
    }
    CHECK(static_cast<int>(inst.queries.size()) == masked_occ);
    // sequence length bookkeeping: original minus masked span lengths plus
    // one [SLOT] per query (masked spans have their cluster's gold length)
    int slot_tokens = 0;
    for (int t : inst.tokens)
      if (t == Vocabulary::kSlot) ++slot_tokens;
    CHECK(slot_tokens == static_cast<int>(inst.queries.size()));
    int masked_total = 0;
    for (size_t c = 0; c < inst.cluster_queries.size(); ++c) {
      const int span_len = inst.cluster_gold[c].second - inst.cluster_gold[c].first + 1;
      masked_total += span_len * static_cast<int>(inst.cluster_queries[c].size());
    }
    CHECK(static_cast<int>(inst.tokens.size()) ==
          n - masked_total + static_cast<int>(inst.queries.size()));
    // each cluster's gold span survives with its surface intact
    for (size_t c = 0; c < inst.cluster_gold.size(); ++c) {
      const auto [gs, ge] = inst.cluster_gold[c];
      CHECK(gs >= 0);
      CHECK(ge < static_cast<int>(inst.tokens.size()));
      for (int k = gs; k <= ge; ++k) CHECK(inst.tokens[static_cast<size_t>(k)] != Vocabulary::kSlot);
    }
  }
}

TEST_CASE("rss_loss_from_scores: equal and dominated scores") {
  RssInstance inst;
  inst.tokens = {Vocabulary::kSlot, 9};
  inst.queries = {{0, 1, 1}};
  inst.cluster_queries = {{0}};
  inst.cluster_gold = {{1, 1}};
  std::vector<SpanCandidate> cands = {{0, 0, RegionTag::History, -1, -1},
                                      {1, 1, RegionTag::History, -1, -1}};
  Tensor equal = Tensor::from_values({1, 2}, {0.3, 0.3});
  CHECK(rss_loss_from_scores(equal, inst, cands).item() == doctest::Approx(std::log(2.0)));
  Tensor dominated = Tensor::from_values({1, 2}, {0.0, 100.0});
  CHECK(rss_loss_from_scores(dominated, inst, cands).item() < 1e-10);
}

TEST_CASE("rss_loss equals the hand-computed sum of per-cluster cross entropies") {
  Vocabulary v = Vocabulary::build({"m0 m1 m2 m3 m4 m5"}, 1);
  // two clusters: "m0 m1" x2 and "m3" x2 planted in one document
  const std::vector<int> toks = ids("m0 m1 m2 m3 m0 m1 m4 m3 m5", v);
  auto clusters = find_recurring_spans(toks, 1, 4);
  REQUIRE(clusters.size() == 2);
  Rng rng(7);
  RssInstance inst = select_and_mask(clusters, toks, rng);
  REQUIRE(inst.cluster_queries.size() == 2);

  EncoderConfig ec;
  ec.n_layers = 1;
  ec.d_model = 8;
  ec.n_heads = 2;
  ec.d_ff = 16;
  ec.window_w = 4;
  ec.max_seq_len = 64;
  ec.vocab_size = v.size();
  ec.dropout_rate = 0.0;
  HeadConfig hc;
  hc.d_model = 8;
  hc.hidden_width = 12;
  hc.l_ans = 4;
  ParamStore params(3);
  init_encoder_params(params, ec);
  init_head_params(params, hc);

  Tensor encoded = encode(inst.tokens, rss_global_mask(inst), ec, params);
  Tensor loss = rss_loss(encoded, inst, params, hc);

  // oracle: recompute scores from the head outputs and assemble the loss
  // with an independent cross entropy
  RssScores s = rss_scores(encoded, inst, params, hc);
  double expect = 0.0;
  const int n_cand = s.scores.dim(1);
  for (size_t c = 0; c < inst.cluster_queries.size(); ++c) {
    const auto [gs, ge] = inst.cluster_gold[c];
    int gold = -1;
    for (int i = 0; i < n_cand; ++i)
      if (s.candidates[static_cast<size_t>(i)].start == gs &&
          s.candidates[static_cast<size_t>(i)].end == ge)
        gold = i;
    REQUIRE(gold >= 0);
    double cluster = 0.0;
    for (int qi : inst.cluster_queries[c]) {
      std::vector<double> row(s.scores.values().begin() + static_cast<size_t>(qi) * n_cand,
                              s.scores.values().begin() + static_cast<size_t>(qi + 1) * n_cand);
      cluster += ce_oracle(row, gold);
    }
    expect += cluster / static_cast<double>(inst.cluster_queries[c].size());
  }
  CHECK(loss.item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("no clusters yields an instance with zero queries") {
  Vocabulary v = Vocabulary::build({"q0 q1 q2"}, 1);
  const std::vector<int> toks = ids("q0 q1 q2", v);
  auto clusters = find_recurring_spans(toks, 1, 4);
  CHECK(clusters.empty());
  Rng rng(1);
  RssInstance inst = select_and_mask(clusters, toks, rng);
  CHECK(inst.queries.empty());
  CHECK(inst.tokens == toks);
}
