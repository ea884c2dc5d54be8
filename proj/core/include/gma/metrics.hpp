#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gma/alignment.hpp"
#include "gma/data.hpp"
#include "gma/policy.hpp"

namespace gma {

// ---- latency ----
// g[i-1] is the number of source words read before target word i was
// written; J the full source length. All require a validated schedule
// (non-decreasing, within [1, J]).

// Mean lag behind the ideal diagonal, averaged up to the first write that
// has seen the whole source: (1/tau) sum_{i<=tau} [g(i) - (i-1)*J/I].
double average_lagging(const std::vector<int>& g, int J);
// sum g(i) / (J * I).
double average_proportion(const std::vector<int>& g, int J);
// Mean read-burst length: g(I) / #{i : g(i) > g(i-1)}, g(0) = 0.
double consecutive_wait(const std::vector<int>& g);
// Like AL but with the non-rewinding delay d_i = max(g(i), d_{i-1} + J/I).
double differentiable_average_lagging(const std::vector<int>& g, int J);

struct LatencyScores {
  double al = 0.0, ap = 0.0, cw = 0.0, dal = 0.0;
};
LatencyScores latency_scores(const PolicyTrace& trace);
LatencyScores mean_latency(const std::vector<PolicyTrace>& traces);

// ---- quality ----

// Corpus BLEU-4: geometric mean of modified n-gram precisions times the
// brevity penalty. n-gram orders whose corpus denominator is zero (all
// hypotheses shorter than n) are left out of the mean; a zero numerator at
// any counted order gives 0. Returns percent.
double corpus_bleu(const std::vector<Sentence>& hypotheses,
                   const std::vector<Sentence>& references);

// ---- alignment ----

// 1 - (|A n S| + |A n P|) / (|A| + |S|), pooled over sentences; P includes
// possible links, S only sure ones.
double alignment_error_rate(const AlignmentSet& predicted, const AlignmentSet& gold);

// Percent of gold links (src, tgt) with src <= g(tgt). Throws
// std::out_of_range when a link's target has no corresponding write.
double within_g_fraction(const AlignmentSet& gold,
                         const std::vector<PolicyTrace>& traces);

// One predicted link per target row: source = round(p_i) clamped to [1, J].
SentenceAlignment alignment_from_positions(const std::vector<double>& p,
                                           int n_targets, int J);

// ---- distribution analyses ----

struct Histogram {
  std::map<int, std::int64_t> counts;
  std::int64_t total = 0;

  void add(int bucket);
  double proportion(int bucket) const;  // 0 when empty
};

// Distribution of g(i) - g(i-1) pooled over traces, g(0) = 0.
Histogram step_size_histogram(const std::vector<PolicyTrace>& traces);

// Distances between consecutive aligned source positions (leftmost link per
// target). non_monotonic buckets A_i - A_{i-1}; monotonic buckets
// max(0, A_i - max_{j<i} A_j). Unlinked targets inside the linked span are
// bridged and counted in skipped_targets.
struct DistanceHistograms {
  Histogram non_monotonic;
  Histogram monotonic;
  std::int64_t skipped_targets = 0;
};
DistanceHistograms monotonic_distance_histogram(const AlignmentSet& gold);

// ---- report ----

struct MetricsReport {
  std::optional<double> bleu, al, ap, cw, dal, aer, within_g;
  std::optional<double> token_accuracy;
  std::map<std::string, Histogram> histograms;
  int sentences = 0;
  int truncated = 0;

  std::string to_json_string() const;  // single JSON object
  std::string to_flat_text() const;    // "key value" lines
};

}  // namespace gma
