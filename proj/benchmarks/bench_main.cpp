#include <benchmark/benchmark.h>

#include "maligan/discriminator.hpp"
#include "maligan/estimators.hpp"
#include "maligan/exact_oracle.hpp"
#include "maligan/recurrent_generator.hpp"
#include "maligan/rollout_q.hpp"
#include "maligan/tabular_generator.hpp"

using namespace maligan;

namespace {

std::vector<Sequence> tabular_batch(const TabularGenerator& gen, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sequence> batch;
  batch.reserve(m);
  for (std::size_t i = 0; i < m; ++i) batch.push_back(gen.sample(rng));
  return batch;
}

}  // namespace

static void BM_TabularSample(benchmark::State& state) {
  Rng init(1);
  auto gen = TabularGenerator::random(8, 16, 2, init, 0.5);
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(gen.sample(rng));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TabularSample);

static void BM_RecurrentSample(benchmark::State& state) {
  RecurrentGenerator::Options opt;
  opt.vocab = 8;
  opt.embed = 16;
  opt.hidden = 32;
  opt.max_len = 20;
  opt.init_seed = 3;
  RecurrentGenerator gen(opt);
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(gen.sample(rng));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RecurrentSample);

static void BM_RecurrentGradLogProb(benchmark::State& state) {
  RecurrentGenerator::Options opt;
  opt.vocab = 8;
  opt.embed = 16;
  opt.hidden = 32;
  opt.max_len = 20;
  opt.init_seed = 5;
  RecurrentGenerator gen(opt);
  Rng rng(6);
  Sequence x = gen.sample(rng);
  for (auto _ : state) benchmark::DoNotOptimize(gen.grad_log_prob(x));
}
BENCHMARK(BM_RecurrentGradLogProb);

static void BM_DiscriminatorScore(benchmark::State& state) {
  Discriminator::Options opt;
  opt.vocab = 8;
  opt.embed = 16;
  opt.hidden = 32;
  opt.init_seed = 7;
  Discriminator disc(opt);
  Sequence x = {3, 1, 4, 1, 5, 2, 6, 5, 3, 5};
  for (auto _ : state) benchmark::DoNotOptimize(disc.score(x));
}
BENCHMARK(BM_DiscriminatorScore);

static void BM_MaliganGrad(benchmark::State& state) {
  Rng init(9);
  auto gen = TabularGenerator::random(6, 12, 2, init, 0.5);
  auto batch = tabular_batch(gen, static_cast<std::size_t>(state.range(0)), 10);
  ScoreFn score = [](const Sequence& x) { return 0.3 + 0.04 * static_cast<double>(x[0]); };
  for (auto _ : state) benchmark::DoNotOptimize(maligan_grad(gen, score, batch, 0.5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MaliganGrad)->Arg(32)->Arg(256);

static void BM_PerStepGrad(benchmark::State& state) {
  Rng init(11);
  auto gen = TabularGenerator::random(6, 8, 2, init, 0.5);
  auto batch = tabular_batch(gen, 16, 12);
  ScoreFn score = [](const Sequence& x) { return 0.3 + 0.04 * static_cast<double>(x[0]); };
  const std::size_t rollouts = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(per_step_grad(gen, score, batch, rollouts, 13));
}
BENCHMARK(BM_PerStepGrad)->Arg(8)->Arg(32);

static void BM_EnumerateGenerator(benchmark::State& state) {
  Rng init(15);
  auto gen = TabularGenerator::random(4, 6, 2, init, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(oracle::enumerate_generator(gen, 4, 6));
}
BENCHMARK(BM_EnumerateGenerator);

static void BM_ExactMaliganLimit(benchmark::State& state) {
  Rng init(17);
  auto gen = TabularGenerator::random(3, 3, 3, init, 0.6);
  auto pd_gen = TabularGenerator::random(3, 3, 3, init, 0.6);
  auto pt = oracle::enumerate_generator(gen, 3, 3);
  auto pd = oracle::enumerate_generator(pd_gen, 3, 3);
  auto dstar = oracle::optimal_discriminator(pd, pt);
  for (auto _ : state) benchmark::DoNotOptimize(oracle::exact_maligan_limit(gen, dstar));
}
BENCHMARK(BM_ExactMaliganLimit);

static void BM_ExactKl(benchmark::State& state) {
  Rng init(19);
  auto a_gen = TabularGenerator::random(4, 6, 2, init, 0.5);
  auto b_gen = TabularGenerator::random(4, 6, 2, init, 0.5);
  auto a = oracle::enumerate_generator(a_gen, 4, 6);
  auto b = oracle::enumerate_generator(b_gen, 4, 6);
  for (auto _ : state) benchmark::DoNotOptimize(oracle::exact_kl(a, b));
}
BENCHMARK(BM_ExactKl);

BENCHMARK_MAIN();
