#include "gma/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gma {

namespace {

void check_schedule(const std::vector<int>& g, int J, const char* what) {
  if (g.empty()) throw std::invalid_argument(std::string(what) + ": empty schedule");
  if (J < 1) throw std::invalid_argument(std::string(what) + ": J must be >= 1");
  int prev = 0;
  for (int gi : g) {
    if (gi < 1 || gi > J)
      throw std::invalid_argument(std::string(what) + ": g outside [1, J]");
    if (gi < prev)
      throw std::invalid_argument(std::string(what) + ": g must be non-decreasing");
    prev = gi;
  }
}

}  // namespace

double average_lagging(const std::vector<int>& g, int J) {
  check_schedule(g, J, "average_lagging");
  std::size_t I = g.size();
  std::size_t tau = I;
  for (std::size_t i = 0; i < I; ++i)
    if (g[i] == J) {
      tau = i + 1;
      break;
    }
  double per_step = static_cast<double>(J) / static_cast<double>(I);
  double sum = 0.0;
  for (std::size_t i = 1; i <= tau; ++i)
    sum += g[i - 1] - static_cast<double>(i - 1) * per_step;
  return sum / static_cast<double>(tau);
}

double average_proportion(const std::vector<int>& g, int J) {
  check_schedule(g, J, "average_proportion");
  double sum = 0.0;
  for (int gi : g) sum += gi;
  return sum / (static_cast<double>(J) * static_cast<double>(g.size()));
}

double consecutive_wait(const std::vector<int>& g) {
  if (g.empty()) throw std::invalid_argument("consecutive_wait: empty schedule");
  int prev = 0;
  std::int64_t bursts = 0;
  for (int gi : g) {
    if (gi < prev) throw std::invalid_argument("consecutive_wait: g must be non-decreasing");
    if (gi > prev) ++bursts;
    prev = gi;
  }
  if (bursts == 0) throw std::invalid_argument("consecutive_wait: schedule never reads");
  // The per-step differences telescope to the final g.
  return static_cast<double>(g.back()) / static_cast<double>(bursts);
}

double differentiable_average_lagging(const std::vector<int>& g, int J) {
  check_schedule(g, J, "differentiable_average_lagging");
  std::size_t I = g.size();
  double per_step = static_cast<double>(J) / static_cast<double>(I);
  double d = 0.0, sum = 0.0;
  for (std::size_t i = 1; i <= I; ++i) {
    d = std::max(static_cast<double>(g[i - 1]), d + per_step);
    sum += d - static_cast<double>(i - 1) * per_step;
  }
  return sum / static_cast<double>(I);
}

LatencyScores latency_scores(const PolicyTrace& trace) {
  LatencyScores s;
  s.al = average_lagging(trace.g, trace.source_len);
  s.ap = average_proportion(trace.g, trace.source_len);
  s.cw = consecutive_wait(trace.g);
  s.dal = differentiable_average_lagging(trace.g, trace.source_len);
  return s;
}

LatencyScores mean_latency(const std::vector<PolicyTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("mean_latency: no traces");
  LatencyScores acc;
  for (const auto& t : traces) {
    LatencyScores s = latency_scores(t);
    acc.al += s.al;
    acc.ap += s.ap;
    acc.cw += s.cw;
    acc.dal += s.dal;
  }
  double n = static_cast<double>(traces.size());
  acc.al /= n;
  acc.ap /= n;
  acc.cw /= n;
  acc.dal /= n;
  return acc;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::int64_t>;

NgramCounts ngrams(const Sentence& s, int n) {
  NgramCounts out;
  if (static_cast<int>(s.size()) < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++out[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                   s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

}  // namespace

double corpus_bleu(const std::vector<Sentence>& hypotheses,
                   const std::vector<Sentence>& references) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu: corpus sizes differ");
  if (hypotheses.empty()) throw std::invalid_argument("bleu: empty corpus");
  constexpr int kMaxOrder = 4;
  std::int64_t matched[kMaxOrder] = {0, 0, 0, 0};
  std::int64_t possible[kMaxOrder] = {0, 0, 0, 0};
  std::int64_t hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const Sentence& hyp = hypotheses[s];
    const Sentence& ref = references[s];
    hyp_len += static_cast<std::int64_t>(hyp.size());
    ref_len += static_cast<std::int64_t>(ref.size());
    for (int n = 1; n <= kMaxOrder; ++n) {
      NgramCounts h = ngrams(hyp, n);
      NgramCounts r = ngrams(ref, n);
      for (const auto& [gram, count] : h) {
        auto it = r.find(gram);
        if (it != r.end()) matched[n - 1] += std::min(count, it->second);
      }
      if (static_cast<int>(hyp.size()) >= n)
        possible[n - 1] += static_cast<std::int64_t>(hyp.size()) - n + 1;
    }
  }
  if (hyp_len == 0) return 0.0;
  // Orders with no possible n-grams anywhere (every hypothesis shorter than
  // n) carry no evidence and are dropped from the geometric mean.
  double log_sum = 0.0;
  int used = 0;
  for (int n = 0; n < kMaxOrder; ++n) {
    if (possible[n] == 0) continue;
    if (matched[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(possible[n]));
    ++used;
  }
  if (used == 0) return 0.0;
  double bp = hyp_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_sum / used);
}

namespace {

std::int64_t count_overlap(const SentenceAlignment& a, const SentenceAlignment& b,
                           bool sure_only) {
  std::int64_t hits = 0;
  for (const auto& la : a.links)
    for (const auto& lb : b.links)
      if (la.src == lb.src && la.tgt == lb.tgt && (!sure_only || lb.sure)) {
        ++hits;
        break;
      }
  return hits;
}

}  // namespace

double alignment_error_rate(const AlignmentSet& predicted, const AlignmentSet& gold) {
  if (predicted.size() != gold.size())
    throw std::invalid_argument("aer: sentence counts differ");
  std::int64_t a_total = 0, s_total = 0, a_in_s = 0, a_in_p = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    a_total += static_cast<std::int64_t>(predicted[i].links.size());
    for (const auto& l : gold[i].links)
      if (l.sure) ++s_total;
    a_in_s += count_overlap(predicted[i], gold[i], /*sure_only=*/true);
    a_in_p += count_overlap(predicted[i], gold[i], /*sure_only=*/false);
  }
  if (a_total + s_total == 0) throw std::invalid_argument("aer: no links");
  return 1.0 - static_cast<double>(a_in_s + a_in_p) / static_cast<double>(a_total + s_total);
}

double within_g_fraction(const AlignmentSet& gold,
                         const std::vector<PolicyTrace>& traces) {
  if (gold.size() != traces.size())
    throw std::invalid_argument("within_g: sentence counts differ");
  std::int64_t total = 0, hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& g = traces[i].g;
    for (const auto& link : gold[i].links) {
      if (link.tgt < 1 || link.tgt > static_cast<int>(g.size()))
        throw std::out_of_range("within_g: link target " + std::to_string(link.tgt) +
                                " has no write in sentence " + std::to_string(i + 1) +
                                " (alignment metrics need teacher-forced traces)");
      ++total;
      if (link.src <= g[static_cast<std::size_t>(link.tgt - 1)]) ++hits;
    }
  }
  if (total == 0) throw std::invalid_argument("within_g: no gold links");
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

SentenceAlignment alignment_from_positions(const std::vector<double>& p, int n_targets,
                                           int J) {
  if (n_targets < 0 || n_targets > static_cast<int>(p.size()))
    throw std::invalid_argument("alignment_from_positions: bad target count");
  if (J < 1) throw std::invalid_argument("alignment_from_positions: J must be >= 1");
  SentenceAlignment out;
  for (int i = 1; i <= n_targets; ++i) {
    long src = std::lround(p[static_cast<std::size_t>(i - 1)]);
    src = std::clamp(src, 1L, static_cast<long>(J));
    out.links.push_back({static_cast<int>(src), i, true});
  }
  return out;
}

void Histogram::add(int bucket) {
  ++counts[bucket];
  ++total;
}

double Histogram::proportion(int bucket) const {
  if (total == 0) return 0.0;
  auto it = counts.find(bucket);
  return it == counts.end() ? 0.0
                            : static_cast<double>(it->second) / static_cast<double>(total);
}

Histogram step_size_histogram(const std::vector<PolicyTrace>& traces) {
  Histogram h;
  for (const auto& t : traces) {
    int prev = 0;
    for (int gi : t.g) {
      h.add(gi - prev);
      prev = gi;
    }
  }
  return h;
}

DistanceHistograms monotonic_distance_histogram(const AlignmentSet& gold) {
  DistanceHistograms out;
  for (const auto& sent : gold) {
    // Leftmost source link per target.
    std::map<int, int> per_target;
    for (const auto& l : sent.links) {
      auto it = per_target.find(l.tgt);
      if (it == per_target.end() || l.src < it->second) per_target[l.tgt] = l.src;
    }
    if (per_target.empty()) continue;
    int last_tgt = per_target.rbegin()->first;
    int first_tgt = per_target.begin()->first;
    bool have_prev = false;
    int prev_src = 0, max_src = 0;
    for (int t = first_tgt; t <= last_tgt; ++t) {
      auto it = per_target.find(t);
      if (it == per_target.end()) {
        ++out.skipped_targets;
        continue;
      }
      int src = it->second;
      if (have_prev) {
        out.non_monotonic.add(src - prev_src);
        out.monotonic.add(std::max(0, src - max_src));
      }
      prev_src = src;
      max_src = std::max(max_src, src);
      have_prev = true;
    }
  }
  return out;
}

namespace {

nlohmann::json histogram_json(const Histogram& h) {
  nlohmann::json buckets = nlohmann::json::object();
  for (const auto& [bucket, count] : h.counts)
    buckets[std::to_string(bucket)] = count;
  return nlohmann::json{{"counts", buckets}, {"total", h.total}};
}

void put(nlohmann::json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

}  // namespace

std::string MetricsReport::to_json_string() const {
  nlohmann::json j = nlohmann::json::object();
  put(j, "bleu", bleu);
  put(j, "al", al);
  put(j, "ap", ap);
  put(j, "cw", cw);
  put(j, "dal", dal);
  put(j, "aer", aer);
  put(j, "within_g", within_g);
  put(j, "token_accuracy", token_accuracy);
  j["sentences"] = sentences;
  j["truncated"] = truncated;
  if (!histograms.empty()) {
    nlohmann::json h = nlohmann::json::object();
    for (const auto& [name, hist] : histograms) h[name] = histogram_json(hist);
    j["histograms"] = h;
  }
  return j.dump(2);
}

std::string MetricsReport::to_flat_text() const {
  std::ostringstream out;
  auto line = [&out](const char* key, const std::optional<double>& v) {
    if (v) out << key << ' ' << *v << '\n';
  };
  line("bleu", bleu);
  line("al", al);
  line("ap", ap);
  line("cw", cw);
  line("dal", dal);
  line("aer", aer);
  line("within_g", within_g);
  line("token_accuracy", token_accuracy);
  out << "sentences " << sentences << '\n';
  out << "truncated " << truncated << '\n';
  for (const auto& [name, hist] : histograms) {
    out << name;
    for (const auto& [bucket, count] : hist.counts)
      out << ' ' << bucket << ':' << count;
    out << '\n';
  }
  return out.str();
}

}  // namespace gma
