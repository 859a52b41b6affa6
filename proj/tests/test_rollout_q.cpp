#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "maligan/exact_oracle.hpp"
#include "maligan/rollout_q.hpp"
#include "test_util.hpp"

using namespace maligan;

namespace {

ScoreFn const_score(double d) {
  return [d](const Sequence&) { return d; };
}

}  // namespace

TEST_CASE("estimate_q: uninformative discriminator gives Q = 1 with zero spread") {
  Rng init(3);
  auto gen = TabularGenerator::random(3, 4, 2, init);
  Rng rng(4);
  auto q = estimate_q(gen, const_score(0.5), {1, 0, 2, 1}, 2, 64, rng);
  CHECK(q.q_mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.q_stderr == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.action == 0);
  CHECK(q.position == 2);
}

TEST_CASE("estimate_q: terminal position short-circuits to the sequence ratio") {
  Rng init(5);
  auto gen = TabularGenerator::random(2, 3, 1, init);
  ScoreFn score = [](const Sequence& x) { return x[0] == 1 ? 0.8 : 0.4; };
  Rng rng(6);
  auto q = estimate_q(gen, score, {1, 0, 1}, 3, 16, rng);
  CHECK(q.q_mean == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(q.q_stderr == 0.0);
  CHECK(q.rollouts == 16);
}

TEST_CASE("estimate_q: argument validation") {
  Rng init(7);
  auto gen = TabularGenerator::random(2, 3, 1, init);
  Rng rng(8);
  CHECK_THROWS_AS(estimate_q(gen, const_score(0.5), {0, 1, 0}, 0, 4, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_q(gen, const_score(0.5), {0, 1, 0}, 4, 4, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_q(gen, const_score(0.5), {0, 1, 0}, 1, 0, rng),
                  std::invalid_argument);
}

TEST_CASE("estimate_q: converges to the enumerated conditional expectation") {
  Rng init(9);
  auto gen = TabularGenerator::random(2, 3, 2, init, 0.6);
  auto pd_gen = TabularGenerator::random(2, 3, 2, init, 0.6);
  auto ptheta = oracle::enumerate_generator(gen, 2, 3);
  auto pd = oracle::enumerate_generator(pd_gen, 2, 3);
  auto dstar = oracle::optimal_discriminator(pd, ptheta);
  auto score = oracle::table_score(ptheta, dstar);

  const Sequence seq = {1, 0, 1};
  const std::size_t t = 1;
  // exact E[r_D(x) | x agrees with seq on the first t tokens]
  double num = 0.0, den = 0.0;
  for (std::size_t code = 0; code < ptheta.size(); ++code) {
    Sequence x = ptheta.decode(code);
    bool match = true;
    for (std::size_t i = 0; i < t; ++i) match = match && x[i] == seq[i];
    if (!match) continue;
    num += ptheta.probs[code] * ratio(dstar[code]);
    den += ptheta.probs[code];
  }
  const double exact = num / den;

  Rng rng(10);
  auto q = estimate_q(gen, score, seq, t, 100000, rng);
  CHECK(std::abs(q.q_mean - exact) < 4.0 * q.q_stderr + 1e-9);
  CHECK(q.q_stderr > 0.0);
}

TEST_CASE("estimate_q: rollout streams are deterministic") {
  Rng init(11);
  auto gen = TabularGenerator::random(3, 4, 1, init);
  ScoreFn score = [](const Sequence& x) { return 0.2 + 0.05 * static_cast<double>(x[3]); };
  Rng a(12), b(12);
  auto qa = estimate_q(gen, score, {2, 1, 0, 2}, 2, 32, a);
  auto qb = estimate_q(gen, score, {2, 1, 0, 2}, 2, 32, b);
  CHECK(qa.q_mean == qb.q_mean);
  CHECK(qa.q_stderr == qb.q_stderr);
}

TEST_CASE("per-step estimator: uninformative discriminator reduces to batch MLE") {
  Rng init(13);
  auto gen = TabularGenerator::random(3, 4, 2, init);
  Rng rng(14);
  std::vector<Sequence> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(gen.sample(rng));
  auto g = per_step_grad(gen, const_score(0.5), batch, 8, 99);
  auto g_mle = mle_grad(gen, batch);
  REQUIRE(g.values.size() == g_mle.values.size());
  for (std::size_t i = 0; i < g.values.size(); ++i)
    CHECK(std::abs(g.values[i] - g_mle.values[i]) < 1e-12);
  CHECK(g.z_hat == doctest::Approx(1.0).epsilon(1e-12));
  // scale * sum Q = total_len / m, the mean sequence length
  CHECK(g.weight_sum == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("per-step estimator: single sequence, single step") {
  Rng init(15);
  auto gen = TabularGenerator::random(2, 1, 0, init);
  std::vector<Sequence> batch = {{1}};
  // the single Q normalizes itself out: weight is exactly total_len / (m * 1)
  auto g = per_step_grad(gen, const_score(0.9), batch, 4, 7);
  auto expect = gen.grad_log_prob({1});
  for (std::size_t i = 0; i < g.values.size(); ++i)
    CHECK(g.values[i] == doctest::Approx(expect.values[i]).epsilon(1e-12));
  CHECK(g.weight_sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("per-step estimator: invariant under rescaling of the ratio profile") {
  Rng init(17);
  auto gen = TabularGenerator::random(2, 3, 1, init);
  Rng rng(18);
  std::vector<Sequence> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(gen.sample(rng));
  // two discriminators whose ratios differ by the constant factor r(0.8)/r(0.5) = 4
  ScoreFn low = const_score(0.5);
  ScoreFn high = const_score(0.8);
  auto g1 = per_step_grad(gen, low, batch, 8, 42);
  auto g2 = per_step_grad(gen, high, batch, 8, 42);
  for (std::size_t i = 0; i < g1.values.size(); ++i)
    CHECK(std::abs(g1.values[i] - g2.values[i]) < 1e-12);
  CHECK(g2.z_hat == doctest::Approx(4.0 * g1.z_hat).epsilon(1e-12));
}

TEST_CASE("per-step estimator: all-floor batch falls back to uniform weights") {
  Rng init(19);
  auto gen = TabularGenerator::random(2, 3, 1, init);
  Rng rng(20);
  std::vector<Sequence> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(gen.sample(rng));
  auto g = per_step_grad(gen, const_score(kClampDelta), batch, 4, 55);
  auto g_mle = mle_grad(gen, batch);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    CHECK(std::abs(g.values[i] - g_mle.values[i]) < 1e-12);
}

TEST_CASE("per-step estimator: empty batch rejected, deterministic in the seed") {
  Rng init(21);
  auto gen = TabularGenerator::random(2, 3, 1, init);
  CHECK_THROWS_AS(per_step_grad(gen, const_score(0.5), {}, 4, 1), std::invalid_argument);

  Rng rng(22);
  std::vector<Sequence> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(gen.sample(rng));
  ScoreFn score = [](const Sequence& x) { return 0.3 + 0.1 * static_cast<double>(x[0]); };
  auto g1 = per_step_grad(gen, score, batch, 8, 77);
  auto g2 = per_step_grad(gen, score, batch, 8, 77);
  CHECK(g1.values == g2.values);
}
