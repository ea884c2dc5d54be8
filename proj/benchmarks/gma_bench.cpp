#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "gma/attention.hpp"
#include "gma/data.hpp"
#include "gma/model.hpp"
#include "gma/policy.hpp"
#include "gma/rng.hpp"
#include "gma/tensor.hpp"

using namespace gma;

namespace {

Model bench_model(int layers, int d_model) {
  ModelConfig cfg;
  cfg.src_vocab = 64;
  cfg.tgt_vocab = 64;
  cfg.d_model = d_model;
  cfg.d_ff = 2 * d_model;
  cfg.layers = layers;
  cfg.heads = 4;
  cfg.max_positions = 128;
  cfg.seed = 11;
  return Model::init(cfg);
}

std::vector<int> bench_ids(int len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> ids;
  for (int i = 0; i < len; ++i)
    ids.push_back(Vocabulary::kSpecials + rng.uniform_int(60));
  return ids;
}

void bm_prior_matrix(benchmark::State& state) {
  auto variant = static_cast<PriorVariant>(state.range(0));
  const int I = 32, J = 64;
  std::vector<double> p, sigma;
  std::vector<int> g;
  for (int i = 0; i < I; ++i) {
    double pi = 1.0 + 1.7 * i;
    p.push_back(std::min<double>(pi, J - 0.2));
    sigma.push_back(std::max(1.0, p.back() / 2.0));
    g.push_back(static_cast<int>(std::floor(std::min<double>(pi + 1.0, J))));
  }
  Tensor p_col = Tensor::from_values({I, 1}, p);
  Tensor sigma_col = Tensor::from_values({I, 1}, sigma);
  NoGradGuard guard;
  for (auto _ : state) {
    Tensor m = prior_matrix(p_col, sigma_col, g, variant, J);
    benchmark::DoNotOptimize(m.values().data());
  }
  state.SetItemsProcessed(state.iterations() * I * J);
}

void bm_posterior_attention(benchmark::State& state) {
  const int I = 32, J = 64;
  Rng rng(13);
  std::vector<double> scores;
  for (int i = 0; i < I * J; ++i) scores.push_back(rng.uniform(-2.0, 2.0));
  Tensor q = Tensor::from_values({I, J}, scores);
  Tensor k = Tensor::from_values({J, J}, std::vector<double>(J * J, 0.0));
  for (int j = 0; j < J; ++j) k.values()[j * J + j] = 1.0;
  NoGradGuard guard;
  Tensor alpha = soft_attention(q, k);
  std::vector<double> p, sigma;
  std::vector<int> g;
  for (int i = 0; i < I; ++i) {
    p.push_back(std::min<double>(1.0 + 1.7 * i, J - 0.2));
    sigma.push_back(std::max(1.0, p.back() / 2.0));
    g.push_back(static_cast<int>(std::floor(std::min<double>(p.back() + 1.0, J))));
  }
  Tensor prior = prior_matrix(Tensor::from_values({I, 1}, p),
                              Tensor::from_values({I, 1}, sigma), g,
                              PriorVariant::gaussian, J);
  for (auto _ : state) {
    Tensor beta = posterior_attention(alpha, prior);
    benchmark::DoNotOptimize(beta.values().data());
  }
  state.SetItemsProcessed(state.iterations() * I * J);
}

void bm_teacher_forced_forward(benchmark::State& state) {
  Model model = bench_model(static_cast<int>(state.range(0)), 32);
  std::vector<int> src = bench_ids(15, 17);
  src.push_back(Vocabulary::kEos);
  std::vector<int> tgt = bench_ids(14, 19);
  NoGradGuard guard;
  for (auto _ : state) {
    TrainForward fwd = model.decode_train(src, tgt);
    benchmark::DoNotOptimize(fwd.loss.value());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int>(tgt.size()));
}

void bm_teacher_forced_backward(benchmark::State& state) {
  Model model = bench_model(static_cast<int>(state.range(0)), 32);
  std::vector<int> src = bench_ids(15, 17);
  src.push_back(Vocabulary::kEos);
  std::vector<int> tgt = bench_ids(14, 19);
  for (auto _ : state) {
    model.params().zero_grads();
    TrainForward fwd = model.decode_train(src, tgt);
    fwd.loss.backward();
    benchmark::DoNotOptimize(fwd.loss.value());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int>(tgt.size()));
}

void bm_streaming_sentence(benchmark::State& state) {
  Model model = bench_model(2, 32);
  std::vector<int> src = bench_ids(15, 23);
  src.push_back(Vocabulary::kEos);
  for (auto _ : state) {
    StreamResult res = simulate_streaming(model, src, 1.0);
    benchmark::DoNotOptimize(res.trace.g.data());
  }
}

BENCHMARK(bm_prior_matrix)->Arg(0)->Arg(1)->Arg(2)->Arg(3);
BENCHMARK(bm_posterior_attention);
BENCHMARK(bm_teacher_forced_forward)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(bm_teacher_forced_backward)->Arg(1)->Arg(2);
BENCHMARK(bm_streaming_sentence);

}  // namespace

BENCHMARK_MAIN();
