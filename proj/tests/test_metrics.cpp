#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "gma/metrics.hpp"
#include "gma/policy.hpp"

using namespace gma;

TEST_CASE("average lagging matches the hand computation") {
  // wait-5 on a 10 word source with 8 writes: g = 5,6,7,8,9,10,10,10.
  // The sum stops at the first write that saw the whole source (i = 6):
  // (5-0) + (6-1.25) + (7-2.5) + (8-3.75) + (9-5) + (10-6.25) = 26.25.
  std::vector<int> g = {5, 6, 7, 8, 9, 10, 10, 10};
  CHECK(average_lagging(g, 10) == doctest::Approx(26.25 / 6.0).epsilon(1e-12));
  // never reaches the end: average over every write
  CHECK(average_lagging({1, 2}, 5) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(average_lagging({}, 5), std::invalid_argument);
  CHECK_THROWS_AS(average_lagging({0, 1}, 5), std::invalid_argument);
  CHECK_THROWS_AS(average_lagging({2, 1}, 5), std::invalid_argument);
  CHECK_THROWS_AS(average_lagging({2, 6}, 5), std::invalid_argument);
}

TEST_CASE("wait-k schedules lag exactly k on square sentences") {
  for (int k = 1; k <= 8; ++k) {
    PolicyTrace t = wait_k_trace(k, 10, 10);
    CHECK(average_lagging(t.g, t.source_len) == doctest::Approx(k).epsilon(1e-12));
  }
}

TEST_CASE("average proportion is the normalized read area") {
  CHECK(average_proportion({1, 2, 3}, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(average_proportion({3, 3, 3}, 3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(average_proportion({}, 3), std::invalid_argument);
}

TEST_CASE("consecutive wait divides reads by read bursts") {
  // g = 2,2,3,5,5: bursts before writes 1, 3 and 4; total reads 5.
  CHECK(consecutive_wait({2, 2, 3, 5, 5}) == doctest::Approx(5.0 / 3.0));
  CHECK(consecutive_wait({1, 1, 1}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(consecutive_wait({}), std::invalid_argument);
  CHECK_THROWS_AS(consecutive_wait({2, 1}), std::invalid_argument);
}

TEST_CASE("differentiable lagging never rewinds the delay") {
  // g = 1,3,3 with J = I = 3: delays 1, 3, 4 give (1-0)+(3-1)+(4-2) = 5.
  CHECK(differentiable_average_lagging({1, 3, 3}, 3) ==
        doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  // the ideal diagonal has constant delay 1
  CHECK(differentiable_average_lagging({1, 2, 3}, 3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(differentiable_average_lagging({}, 3), std::invalid_argument);
}

TEST_CASE("latency scores average across traces") {
  PolicyTrace a = trace_from_g({1, 2, 3}, 3);
  PolicyTrace b = trace_from_g({3, 3, 3}, 3);
  LatencyScores sa = latency_scores(a);
  LatencyScores sb = latency_scores(b);
  LatencyScores m = mean_latency({a, b});
  CHECK(m.al == doctest::Approx((sa.al + sb.al) / 2.0));
  CHECK(m.ap == doctest::Approx((sa.ap + sb.ap) / 2.0));
  CHECK(m.cw == doctest::Approx((sa.cw + sb.cw) / 2.0));
  CHECK(m.dal == doctest::Approx((sa.dal + sb.dal) / 2.0));
  CHECK_THROWS_AS(mean_latency({}), std::invalid_argument);
}

TEST_CASE("bleu matches the short-hypothesis hand case") {
  // all precisions 1, the 4-gram order has no hypothesis long enough and is
  // dropped; only the brevity penalty exp(1 - 4/3) remains
  double b = corpus_bleu({{"the", "cat", "sat"}},
                         {{"the", "cat", "sat", "down"}});
  CHECK(b == doctest::Approx(71.6531310574).epsilon(1e-8));
}

TEST_CASE("bleu is 100 on an exact match and 0 without overlap") {
  Sentence s = {"a", "b", "c", "d", "e"};
  CHECK(corpus_bleu({s}, {s}) == doctest::Approx(100.0));
  CHECK(corpus_bleu({{"a", "b", "c", "d"}}, {{"e", "f", "g", "h"}}) == 0.0);
  // one unmatched 4-gram order zeroes everything
  CHECK(corpus_bleu({{"a", "b", "c", "e"}}, {{"a", "b", "c", "d"}}) == 0.0);
}

TEST_CASE("bleu clips repeated n-grams against the reference") {
  // p1 = 4/5, p2 = 3/4, p3 = 2/3, p4 = 1/2, no brevity penalty:
  // 100 * (0.2)^(1/4)
  double b = corpus_bleu({{"a", "a", "b", "c", "d"}}, {{"a", "b", "c", "d"}});
  CHECK(b == doctest::Approx(100.0 * std::pow(0.2, 0.25)).epsilon(1e-12));
}

TEST_CASE("bleu pools counts over the corpus") {
  std::vector<Sentence> hyp = {{"a", "b"}, {"c"}};
  std::vector<Sentence> ref = {{"a", "b"}, {"c"}};
  CHECK(corpus_bleu(hyp, ref) == doctest::Approx(100.0));
  CHECK_THROWS_AS(corpus_bleu({{"a"}}, {}), std::invalid_argument);
  CHECK_THROWS_AS(corpus_bleu({}, {}), std::invalid_argument);
  // empty hypotheses score zero rather than dividing by zero
  CHECK(corpus_bleu({{}}, {{"a"}}) == 0.0);
}

TEST_CASE("alignment error rate on a half-right prediction") {
  AlignmentSet pred(1), gold(1);
  pred[0].links = {{1, 1, true}, {2, 2, true}};
  gold[0].links = {{1, 1, true}, {3, 2, true}};
  // |A n S| = |A n P| = 1, |A| = |S| = 2
  CHECK(alignment_error_rate(pred, gold) == doctest::Approx(0.5));
  CHECK(alignment_error_rate(gold, gold) == doctest::Approx(0.0));
}

TEST_CASE("possible links forgive without demanding recall") {
  AlignmentSet pred(1), gold(1);
  pred[0].links = {{1, 1, true}, {2, 2, true}};
  gold[0].links = {{1, 1, true}, {2, 2, false}};
  // S = {(1,1)}: hits 1 + 2 over |A| + |S| = 3
  CHECK(alignment_error_rate(pred, gold) == doctest::Approx(0.0));
  // dropping the possible link costs nothing
  AlignmentSet sparse(1);
  sparse[0].links = {{1, 1, true}};
  CHECK(alignment_error_rate(sparse, gold) == doctest::Approx(0.0));

  AlignmentSet empty(1);
  CHECK_THROWS_AS(alignment_error_rate(empty, empty), std::invalid_argument);
  CHECK_THROWS_AS(alignment_error_rate(pred, AlignmentSet(2)),
                  std::invalid_argument);
}

TEST_CASE("alignment error rate pools counts across sentences") {
  AlignmentSet pred(2), gold(2);
  pred[0].links = {{1, 1, true}};
  gold[0].links = {{1, 1, true}};
  pred[1].links = {{2, 1, true}};
  gold[1].links = {{3, 1, true}};
  // pooled: hits 1 + 1 over |A| + |S| = 4
  CHECK(alignment_error_rate(pred, gold) == doctest::Approx(0.5));
}

TEST_CASE("within-g counts gold links already readable at write time") {
  AlignmentSet gold(1);
  gold[0].links = {{1, 1, true}, {3, 2, true}};
  PolicyTrace t = trace_from_g({2, 2, 3}, 3);
  CHECK(within_g_fraction(gold, {t}) == doctest::Approx(50.0));

  AlignmentSet beyond(1);
  beyond[0].links = {{1, 4, true}};  // target 4 was never written
  CHECK_THROWS_AS(within_g_fraction(beyond, {t}), std::out_of_range);
  CHECK_THROWS_AS(within_g_fraction(gold, {}), std::invalid_argument);
  AlignmentSet none(1);
  CHECK_THROWS_AS(within_g_fraction(none, {t}), std::invalid_argument);
}

TEST_CASE("predicted positions round to clamped source links") {
  SentenceAlignment a = alignment_from_positions({1.2, 2.7, 9.0}, 3, 5);
  CHECK(a.links == std::vector<AlignmentLink>{{1, 1, true},
                                              {3, 2, true},
                                              {5, 3, true}});
  SentenceAlignment b = alignment_from_positions({0.2}, 1, 5);
  CHECK(b.links[0].src == 1);
  CHECK_THROWS_AS(alignment_from_positions({1.0}, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS(alignment_from_positions({1.0}, 1, 0), std::invalid_argument);
}

TEST_CASE("step size histogram pools schedule jumps") {
  PolicyTrace a = trace_from_g({2, 2, 3}, 3);
  PolicyTrace b = trace_from_g({1}, 2);
  Histogram h = step_size_histogram({a, b});
  CHECK(h.total == 4);
  CHECK(h.counts.at(2) == 1);
  CHECK(h.counts.at(0) == 1);
  CHECK(h.counts.at(1) == 2);
  CHECK(h.proportion(1) == doctest::Approx(0.5));
  CHECK(h.proportion(7) == 0.0);
  CHECK(Histogram{}.proportion(0) == 0.0);
}

TEST_CASE("alignment distances split into raw and forward-only jumps") {
  AlignmentSet gold(1);
  // leftmost sources per target: 3, 1, 4
  gold[0].links = {{5, 1, true}, {3, 1, true}, {1, 2, true}, {4, 3, true}};
  DistanceHistograms d = monotonic_distance_histogram(gold);
  CHECK(d.skipped_targets == 0);
  CHECK(d.non_monotonic.total == 2);
  CHECK(d.non_monotonic.counts.at(-2) == 1);
  CHECK(d.non_monotonic.counts.at(3) == 1);
  CHECK(d.monotonic.total == 2);
  CHECK(d.monotonic.counts.at(0) == 1);
  CHECK(d.monotonic.counts.at(1) == 1);
}

TEST_CASE("unlinked targets inside the span are bridged and counted") {
  AlignmentSet gold(1);
  gold[0].links = {{2, 1, true}, {4, 3, true}};
  DistanceHistograms d = monotonic_distance_histogram(gold);
  CHECK(d.skipped_targets == 1);
  CHECK(d.non_monotonic.total == 1);
  CHECK(d.non_monotonic.counts.at(2) == 1);
  CHECK(d.monotonic.counts.at(2) == 1);
  // a sentence with no links contributes nothing
  AlignmentSet empty(1);
  DistanceHistograms e = monotonic_distance_histogram(empty);
  CHECK(e.non_monotonic.total == 0);
  CHECK(e.skipped_targets == 0);
}

TEST_CASE("reports serialize set fields only") {
  MetricsReport r;
  r.bleu = 42.5;
  r.al = 1.25;
  r.sentences = 3;
  Histogram h;
  h.add(1);
  h.add(1);
  h.add(-2);
  r.histograms["step_size"] = h;

  std::string j = r.to_json_string();
  CHECK(j.find("\"bleu\": 42.5") != std::string::npos);
  CHECK(j.find("\"al\": 1.25") != std::string::npos);
  CHECK(j.find("\"aer\"") == std::string::npos);
  CHECK(j.find("\"step_size\"") != std::string::npos);
  CHECK(j.find("\"-2\": 1") != std::string::npos);

  std::string flat = r.to_flat_text();
  CHECK(flat.find("bleu 42.5\n") != std::string::npos);
  CHECK(flat.find("sentences 3\n") != std::string::npos);
  CHECK(flat.find("aer") == std::string::npos);
  CHECK(flat.find("step_size -2:1 1:2\n") != std::string::npos);
}
