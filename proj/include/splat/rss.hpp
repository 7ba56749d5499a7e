#pragma once

#include <unordered_set>
#include <utility>
#include <vector>

#include "splat/heads.hpp"
#include "splat/param_store.hpp"
#include "splat/rng.hpp"
#include "splat/tensor.hpp"

namespace splat {

// A group of identical recurring token spans.
struct SpanCluster {
  std::vector<int> surface;                      // token ids of the repeated n-gram
  std::vector<std::pair<int, int>> occurrences;  // inclusive, mutually non-overlapping
};

struct RssQuery {
  int position = 0;  // [SLOT] index in the masked sequence
  int gold_start = 0, gold_end = 0;  // surviving occurrence, masked coordinates
};

struct RssInstance {
  std::vector<int> tokens;  // masked sequence
  std::vector<RssQuery> queries;
  std::vector<std::vector<int>> cluster_queries;      // per selected cluster -> query indices
  std::vector<std::pair<int, int>> cluster_gold;      // per selected cluster, masked coords
  int occurrence_total = 0;                           // sum over selected clusters
};

// Recurring n-gram clusters of length min_len..max_len with at least two
// non-overlapping occurrences. Clusters are mutually non-overlapping:
// candidates are claimed in (occurrence count desc, length desc, position)
// order, so a shorter n-gram whose occurrences are covered by an admitted
// longer cluster is suppressed. Single-token clusters whose token is in
// stop_ids are skipped.
std::vector<SpanCluster> find_recurring_spans(const std::vector<int>& tokens, int min_len,
                                              int max_len,
                                              const std::unordered_set<int>* stop_ids = nullptr);

// Randomly orders the clusters, greedily admits them while the running
// occurrence total stays within max_occurrences, keeps one uniformly random
// occurrence per admitted cluster, and replaces every other occurrence with a
// single [SLOT] token. Deterministic under a fixed rng state.
RssInstance select_and_mask(const std::vector<SpanCluster>& clusters,
                            const std::vector<int>& tokens, Rng& rng, int max_occurrences = 30);

struct RssScores {
  Tensor scores;  // [queries, candidates]
  std::vector<SpanCandidate> candidates;
};

// Dot-product scores of every query representation (slot head) against every
// candidate span of the masked sequence (span head, same L_ans cap).
RssScores rss_scores(const Tensor& encoded, const RssInstance& inst, ParamStore& params,
                     const HeadConfig& cfg);

// Per-cluster cross-entropy toward the surviving occurrence, averaged over
// the cluster's queries; the total is the sum over clusters.
Tensor rss_loss_from_scores(const Tensor& scores, const RssInstance& inst,
                            const std::vector<SpanCandidate>& candidates);

Tensor rss_loss(const Tensor& encoded, const RssInstance& inst, ParamStore& params,
                const HeadConfig& cfg);

// Queries receive global attention; everything else is local.
GlobalMask rss_global_mask(const RssInstance& inst);

// Closed list backing the stopword exclusion for single-token clusters.
const std::vector<const char*>& rss_stopwords();

}  // namespace splat
