#include <cmath>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "gma/metrics.hpp"
#include "gma/model.hpp"
#include "gma/policy.hpp"

namespace gma {

Adam::Adam(std::vector<Tensor> params) : params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.defined()) throw std::invalid_argument("adam: undefined parameter");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double lr, double beta1, double beta2, double eps, double grad_scale) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const std::vector<double>* g = p.has_grad() ? &p.grad() : nullptr;
    auto& m = m_[i];
    auto& v = v_[i];
    auto& x = p.values();
    for (std::size_t k = 0; k < x.size(); ++k) {
      double gk = g ? (*g)[k] * grad_scale : 0.0;
      m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
      v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
      double update = lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
      if (update != 0.0) x[k] -= update;
    }
  }
}

double global_grad_norm(const std::vector<Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

namespace {

struct DevScores {
  double bleu = std::numeric_limits<double>::quiet_NaN();
  double al = std::numeric_limits<double>::quiet_NaN();
};

DevScores score_dev(const Model& model, const ParallelCorpus& dev,
                    const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                    int limit) {
  DevScores out;
  std::size_t n = std::min<std::size_t>(dev.size(), static_cast<std::size_t>(limit));
  if (n == 0) return out;
  NoGradGuard guard;
  std::vector<Sentence> hyps, refs;
  std::vector<PolicyTrace> traces;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<int> src = src_vocab.encode(dev.source[s]);
    src.push_back(Vocabulary::kEos);
    StreamResult res = simulate_streaming(model, src, model.config().gma.delta);
    hyps.push_back(tgt_vocab.decode(res.hypothesis));
    refs.push_back(dev.target[s]);
    traces.push_back(std::move(res.trace));
  }
  out.bleu = corpus_bleu(hyps, refs);
  out.al = mean_latency(traces).al;
  return out;
}

}  // namespace

TrainResult train_model(Model& model, const ParallelCorpus& train_corpus,
                        const ParallelCorpus& dev_corpus,
                        const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                        const TrainOptions& opts, std::ostream* progress) {
  if (opts.epochs < 1 || opts.batch_size < 1)
    throw std::invalid_argument("train: epochs and batch_size must be >= 1");
  if (!(opts.lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (train_corpus.size() == 0) throw std::invalid_argument("train: empty corpus");

  std::vector<Tensor> params;
  for (auto& [name, t] : model.params().named()) params.push_back(t);
  Adam opt(params);
  Rng dropout_rng(opts.seed * 0x9e3779b97f4a7c15ULL + 1);

  TrainResult result;
  int steps = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    BatchPlan plan = make_batches(train_corpus, src_vocab, tgt_vocab, opts.batch_size,
                                  model.config().max_positions,
                                  opts.seed + static_cast<std::uint64_t>(epoch));
    if (plan.batches.empty())
      throw std::invalid_argument("train: every sentence exceeds max_positions");
    double loss_sum = 0.0;
    long loss_count = 0;
    for (const Batch& batch : plan.batches) {
      model.params().zero_grads();
      Tensor total;
      Rng* rng = model.config().dropout > 0.0 ? &dropout_rng : nullptr;
      for (int r = 0; r < batch.rows; ++r) {
        TrainForward fwd =
            model.decode_train(batch.source_row(r), batch.target_row(r),
                               /*capture_attn=*/false, rng);
        total = total.defined() ? add(total, fwd.loss) : fwd.loss;
      }
      Tensor loss = scale(total, 1.0 / batch.rows);
      double lv = loss.value();
      if (!std::isfinite(lv))
        throw std::runtime_error("training diverged: non-finite loss at step " +
                                 std::to_string(steps + 1));
      loss.backward();
      double grad_scale = 1.0;
      if (opts.clip_norm > 0.0) {
        double norm = global_grad_norm(params);
        if (norm > opts.clip_norm) grad_scale = opts.clip_norm / norm;
      }
      opt.step(opts.lr, opts.beta1, opts.beta2, opts.adam_eps, grad_scale);
      ++steps;
      loss_sum += lv;
      ++loss_count;
    }
    EpochLog log;
    log.step = steps;
    log.loss = loss_sum / static_cast<double>(loss_count);
    if (opts.dev_eval_size > 0 && dev_corpus.size() > 0) {
      DevScores dev = score_dev(model, dev_corpus, src_vocab, tgt_vocab, opts.dev_eval_size);
      log.dev_bleu = dev.bleu;
      log.dev_al = dev.al;
    }
    result.log.push_back(log);
    result.final_loss = log.loss;
    if (progress) {
      (*progress) << "epoch " << (epoch + 1) << " step " << log.step << " loss "
                  << log.loss;
      if (!std::isnan(log.dev_bleu))
        (*progress) << " dev_bleu " << log.dev_bleu << " dev_al " << log.dev_al;
      (*progress) << std::endl;
    }
  }
  return result;
}

double token_accuracy(const Model& model, const ParallelCorpus& corpus,
                      const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  if (corpus.size() == 0) throw std::invalid_argument("token_accuracy: empty corpus");
  NoGradGuard guard;
  long correct = 0, total = 0;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    std::vector<int> src = src_vocab.encode(corpus.source[s]);
    src.push_back(Vocabulary::kEos);
    std::vector<int> tgt = tgt_vocab.encode(corpus.target[s]);
    TrainForward fwd = model.decode_train(src, tgt);
    std::vector<int> labels(tgt);
    labels.push_back(Vocabulary::kEos);
    int v = fwd.logits.dim(1);
    const auto& lv = fwd.logits.values();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double* row = lv.data() + static_cast<std::ptrdiff_t>(i) * v;
      int best = 0;
      for (int j = 1; j < v; ++j)
        if (row[j] > row[best]) best = j;
      if (best == labels[i]) ++correct;
      ++total;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace gma
