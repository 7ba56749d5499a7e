#include "splat/rss.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "splat/ops.hpp"
#include "splat/vocab.hpp"

namespace splat {

const std::vector<const char*>& rss_stopwords() {
  static const std::vector<const char*> words = {
      "a",    "an",  "and",  "are", "as",   "at",   "be",  "but", "by",   "for", "from", "had",
      "has",  "have", "he",  "her", "his",  "i",    "in",  "is",  "it",   "its", "me",   "my",
      "no",   "not", "of",   "on",  "or",   "our",  "she", "so",  "that", "the", "their", "them",
      "they", "this", "to",  "was", "we",   "were", "will", "with", "you", "your"};
  return words;
}

std::vector<SpanCluster> find_recurring_spans(const std::vector<int>& tokens, int min_len,
                                              int max_len,
                                              const std::unordered_set<int>* stop_ids) {
  if (tokens.empty()) throw std::runtime_error("find_recurring_spans: empty token sequence");
  if (min_len < 1 || max_len < min_len)
    throw std::runtime_error("find_recurring_spans: bad length bounds");
  const int n = static_cast<int>(tokens.size());

  struct Candidate {
    std::vector<int> surface;
    std::vector<std::pair<int, int>> occurrences;
  };
  std::vector<Candidate> candidates;
  for (int len = min_len; len <= std::min(max_len, n); ++len) {
    std::map<std::vector<int>, std::vector<int>> starts_by_surface;
    std::vector<int> key;
    for (int start = 0; start + len <= n; ++start) {
      key.assign(tokens.begin() + start, tokens.begin() + start + len);
      starts_by_surface[key].push_back(start);
    }
    for (auto& [surface, starts] : starts_by_surface) {
      if (starts.size() < 2) continue;
      if (len == 1 && stop_ids && stop_ids->count(surface[0])) continue;
      // greedy left-to-right non-overlapping selection within the surface
      Candidate c;
      c.surface = surface;
      int next_free = 0;
      for (int s : starts) {
        if (s >= next_free) {
          c.occurrences.emplace_back(s, s + len - 1);
          next_free = s + len;
        }
      }
      if (c.occurrences.size() >= 2) candidates.push_back(std::move(c));
    }
  }

  // Priority: more occurrences first, then longer surfaces, then earlier
  // position; claimed positions suppress overlapping later candidates.
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.occurrences.size() != b.occurrences.size())
      return a.occurrences.size() > b.occurrences.size();
    if (a.surface.size() != b.surface.size()) return a.surface.size() > b.surface.size();
    if (a.occurrences[0].first != b.occurrences[0].first)
      return a.occurrences[0].first < b.occurrences[0].first;
    return a.surface < b.surface;
  });

  std::vector<uint8_t> claimed(static_cast<size_t>(n), 0);
  std::vector<SpanCluster> out;
  for (Candidate& c : candidates) {
    std::vector<std::pair<int, int>> free_occ;
    for (const auto& [s, e] : c.occurrences) {
      bool overlaps = false;
      for (int i = s; i <= e && !overlaps; ++i) overlaps = claimed[static_cast<size_t>(i)] != 0;
      if (!overlaps) free_occ.emplace_back(s, e);
    }
    if (free_occ.size() < 2) continue;
    for (const auto& [s, e] : free_occ)
      for (int i = s; i <= e; ++i) claimed[static_cast<size_t>(i)] = 1;
    out.push_back({std::move(c.surface), std::move(free_occ)});
  }
  std::sort(out.begin(), out.end(), [](const SpanCluster& a, const SpanCluster& b) {
    return a.occurrences[0].first < b.occurrences[0].first;
  });
  return out;
}

RssInstance select_and_mask(const std::vector<SpanCluster>& clusters,
                            const std::vector<int>& tokens, Rng& rng, int max_occurrences) {
  RssInstance inst;
  std::vector<int> order(clusters.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);

  struct Masked {
    int start, end, cluster;
  };
  std::vector<Masked> masked;
  std::vector<std::pair<int, int>> survivors;  // original coordinates per selected cluster
  std::vector<int> selected;
  int total = 0;
  for (int ci : order) {
    const SpanCluster& c = clusters[static_cast<size_t>(ci)];
    const int occ = static_cast<int>(c.occurrences.size());
    if (total + occ > max_occurrences) continue;
    total += occ;
    const int survivor = static_cast<int>(rng.next_below(static_cast<uint64_t>(occ)));
    for (int o = 0; o < occ; ++o) {
      if (o == survivor) continue;
      masked.push_back({c.occurrences[static_cast<size_t>(o)].first,
                        c.occurrences[static_cast<size_t>(o)].second,
                        static_cast<int>(selected.size())});
    }
    survivors.push_back(c.occurrences[static_cast<size_t>(survivor)]);
    selected.push_back(ci);
  }
  inst.occurrence_total = total;
  inst.cluster_queries.resize(selected.size());
  inst.cluster_gold.resize(selected.size());

  std::sort(masked.begin(), masked.end(),
            [](const Masked& a, const Masked& b) { return a.start < b.start; });

  // Rebuild the sequence, replacing each masked occurrence with [SLOT] and
  // tracking old -> new positions for the surviving spans.
  const int n = static_cast<int>(tokens.size());
  std::vector<int> new_pos(static_cast<size_t>(n), -1);
  size_t mi = 0;
  for (int i = 0; i < n;) {
    if (mi < masked.size() && masked[mi].start == i) {
      const int q = static_cast<int>(inst.tokens.size());
      inst.tokens.push_back(Vocabulary::kSlot);
      inst.cluster_queries[static_cast<size_t>(masked[mi].cluster)].push_back(
          static_cast<int>(inst.queries.size()));
      inst.queries.push_back({q, 0, 0});
      i = masked[mi].end + 1;
      ++mi;
    } else {
      new_pos[static_cast<size_t>(i)] = static_cast<int>(inst.tokens.size());
      inst.tokens.push_back(tokens[static_cast<size_t>(i)]);
      ++i;
    }
  }
  for (size_t c = 0; c < survivors.size(); ++c) {
    const auto [s, e] = survivors[c];
    inst.cluster_gold[c] = {new_pos[static_cast<size_t>(s)], new_pos[static_cast<size_t>(e)]};
    for (int qi : inst.cluster_queries[c]) {
      inst.queries[static_cast<size_t>(qi)].gold_start = new_pos[static_cast<size_t>(s)];
      inst.queries[static_cast<size_t>(qi)].gold_end = new_pos[static_cast<size_t>(e)];
    }
  }
  return inst;
}

GlobalMask rss_global_mask(const RssInstance& inst) {
  GlobalMask g(inst.tokens.size(), 0);
  for (const RssQuery& q : inst.queries) g[static_cast<size_t>(q.position)] = 1;
  return g;
}

RssScores rss_scores(const Tensor& encoded, const RssInstance& inst, ParamStore& params,
                     const HeadConfig& cfg) {
  if (inst.queries.empty()) throw std::runtime_error("rss: instance has no queries");
  const int n = static_cast<int>(inst.tokens.size());

  // Every span of the masked sequence up to the cap is a candidate.
  RssScores out;
  for (int start = 0; start < n; ++start)
    for (int len = 1; len <= std::min(cfg.l_ans, n - start); ++len)
      out.candidates.push_back({start, start + len - 1, RegionTag::History, -1, -1});

  Tensor h_span = span_representations(encoded, out.candidates, params, cfg);
  std::vector<int> query_positions;
  query_positions.reserve(inst.queries.size());
  for (const RssQuery& q : inst.queries) query_positions.push_back(q.position);
  Tensor h_query = slot_query_representations(encoded, query_positions, params, cfg);
  out.scores = matmul_nt(h_query, h_span);  // [Q, C]
  return out;
}

Tensor rss_loss_from_scores(const Tensor& scores, const RssInstance& inst,
                            const std::vector<SpanCandidate>& candidates) {
  auto candidate_index = [&](int start, int end) {
    for (size_t i = 0; i < candidates.size(); ++i)
      if (candidates[i].start == start && candidates[i].end == end) return static_cast<int>(i);
    return -1;
  };
  Tensor total;
  for (size_t c = 0; c < inst.cluster_queries.size(); ++c) {
    const auto [gs, ge] = inst.cluster_gold[c];
    const int gold = candidate_index(gs, ge);
    if (gold < 0)
      throw std::runtime_error("rss_loss: gold span longer than l_ans; cluster should have been "
                               "excluded at selection time");
    Tensor rows = gather_rows(scores, inst.cluster_queries[c]);
    Tensor part =
        cross_entropy_rows(rows, std::vector<int>(inst.cluster_queries[c].size(), gold));
    total = total.defined() ? add(total, part) : part;
  }
  return total;
}

Tensor rss_loss(const Tensor& encoded, const RssInstance& inst, ParamStore& params,
                const HeadConfig& cfg) {
  RssScores s = rss_scores(encoded, inst, params, cfg);
  return rss_loss_from_scores(s.scores, inst, s.candidates);
}

}  // namespace splat
