#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "maligan/estimators.hpp"
#include "maligan/exact_oracle.hpp"
#include "test_util.hpp"

using namespace maligan;

namespace {

ScoreFn const_score(double d) {
  return [d](const Sequence&) { return d; };
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < tol);
}

}  // namespace

TEST_CASE("ratio: fixed points and clamp-range enforcement") {
  CHECK(ratio(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ratio(0.8) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(ratio(1.0 - 1e-4) == doctest::Approx(9999.0).epsilon(1e-9));
  CHECK(ratio(1e-4) == doctest::Approx(1e-4 / (1.0 - 1e-4)).epsilon(1e-12));
  CHECK_THROWS_AS(ratio(0.0), std::domain_error);
  CHECK_THROWS_AS(ratio(1.0), std::domain_error);
  CHECK_THROWS_AS(ratio(1e-6), std::domain_error);
}

TEST_CASE("normalized weights: algebra") {
  std::vector<double> equal = {4.0, 4.0, 4.0, 4.0};
  auto w = normalized_weights(equal, 1.0);
  for (double v : w) CHECK(v == 0.0);  // degenerate group, b = 1: exact zeros

  std::vector<double> two = {3.0, 1.0};
  check_close(normalized_weights(two, 0.0), {0.75, 0.25}, 1e-15);
  check_close(normalized_weights(two, 1.0), {0.25, -0.25}, 1e-15);

  CHECK_THROWS_AS(normalized_weights(std::vector<double>{}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(normalized_weights(std::vector<double>{1.0, 0.0}, 0.0), std::domain_error);
  CHECK_THROWS_AS(normalized_weights(std::vector<double>{1.0, -2.0}, 0.0), std::domain_error);
}

TEST_CASE("normalized weights: scale invariance and weight-sum identity") {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t m = 2 + rng.index(10);
    std::vector<double> r(m), rs(m);
    const double c = std::exp(rng.uniform(-5.0, 5.0));
    for (std::size_t i = 0; i < m; ++i) {
      r[i] = std::exp(rng.uniform(-4.0, 4.0));
      rs[i] = c * r[i];
    }
    const double b = rng.uniform(0.0, 1.0);
    auto w = normalized_weights(r, b);
    auto w2 = normalized_weights(rs, b);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(std::abs(w[i] - w2[i]) < 1e-12);
      total += w[i];
    }
    CHECK(std::abs(total - (1.0 - b)) < 1e-12);
  }
}

TEST_CASE("weighted batch: diagnostics") {
  Rng init(5);
  auto gen = TabularGenerator::random(2, 2, 1, init);
  std::vector<Sequence> batch = {{0, 0}, {0, 1}, {1, 0}};
  // D chosen so ratios are 1, 4, 1/4
  ScoreFn score = [](const Sequence& x) {
    if (x == Sequence{0, 1}) return 0.8;
    if (x == Sequence{1, 0}) return 0.2;
    return 0.5;
  };
  auto wb = WeightedBatch::build(batch, score, 0.0);
  CHECK(wb.z_hat == doctest::Approx((1.0 + 4.0 + 0.25) / 3.0).epsilon(1e-12));
  CHECK(wb.max_ratio == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(wb.weight_sum == doctest::Approx(1.0).epsilon(1e-12));
  double w2 = 0.0, h = 0.0;
  for (double v : wb.weights) {
    w2 += v * v;
    h -= v * std::log(v);  // weights positive at b = 0 and sum to 1
  }
  CHECK(wb.ess == doctest::Approx(1.0 / w2).epsilon(1e-12));
  CHECK(wb.weight_entropy == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("maligan estimator: uninformative discriminator reduces to batch MLE") {
  Rng init(7);
  auto gen = TabularGenerator::random(3, 3, 1, init);
  Rng rng(8);
  std::vector<Sequence> batch;
  for (int i = 0; i < 16; ++i) batch.push_back(gen.sample(rng));
  auto g_mali = maligan_grad(gen, const_score(0.5), batch, 0.0);
  auto g_mle = mle_grad(gen, batch);
  check_close(g_mali.values, g_mle.values, 1e-12);

  // any constant discriminator with b = 1 cancels exactly
  auto g_zero = maligan_grad(gen, const_score(0.73), batch, 1.0);
  for (double v : g_zero.values) CHECK(v == 0.0);
  CHECK(g_zero.weight_sum == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("unnormalized single-sample estimator is unbiased at the optimal discriminator") {
  Rng init(11);
  auto gen = TabularGenerator::random(2, 2, 1, init, 0.6);
  auto pd_gen = TabularGenerator::random(2, 2, 1, init, 0.6);
  auto ptheta = oracle::enumerate_generator(gen, 2, 2);
  auto pd = oracle::enumerate_generator(pd_gen, 2, 2);
  auto dstar = oracle::optimal_discriminator(pd, ptheta);
  auto score = oracle::table_score(ptheta, dstar);
  auto exact = oracle::exact_expected_grad(gen, pd);

  auto draw_one = [&](Rng& rng) {
    std::vector<Sequence> one = {gen.sample(rng)};
    return unnormalized_importance_grad(gen, score, one);
  };
  auto stats = oracle::measure_estimator(draw_one, exact.values, 40000, 123);
  CHECK(stats.max_bias_in_se < 4.0);
}

TEST_CASE("reinforce: constant reward with a primed baseline vanishes") {
  Rng init(13);
  auto gen = TabularGenerator::random(2, 3, 1, init);
  Rng rng(14);
  std::vector<Sequence> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(gen.sample(rng));

  MovingBaseline base;
  reinforce_grad(gen, const_score(0.6), batch, RewardKind::Score, base, 0.0);
  CHECK(base.primed);
  CHECK(base.value == doctest::Approx(0.6).epsilon(1e-12));
  auto g = reinforce_grad(gen, const_score(0.6), batch, RewardKind::Score, base, 0.0);
  for (double v : g.values) CHECK(v == 0.0);

  // entropy-only gradient equals the batch-mean entropy gradient
  auto ge = reinforce_grad(gen, const_score(0.6), batch, RewardKind::Score, base, 0.5);
  GradientVector expect(gen.param_count());
  for (const auto& x : batch) expect.axpy(0.5 / batch.size(), gen.grad_entropy(x).values);
  check_close(ge.values, expect.values, 1e-12);

  // log-score reward kind uses log D
  MovingBaseline base2;
  reinforce_grad(gen, const_score(0.6), batch, RewardKind::LogScore, base2, 0.0);
  CHECK(base2.value == doctest::Approx(std::log(0.6)).epsilon(1e-12));
}

TEST_CASE("mle over the exhaustive batch equals the enumerated uniform expectation") {
  Rng init(15);
  auto gen = TabularGenerator::random(2, 2, 1, init);
  std::vector<Sequence> all = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  auto g = mle_grad(gen, all);
  auto uniform = oracle::from_probs(2, 2, {0.25, 0.25, 0.25, 0.25});
  auto exact = oracle::exact_expected_grad(gen, uniform);
  check_close(g.values, exact.values, 1e-12);
}

TEST_CASE("ascending the estimator limit at the optimal discriminator shrinks KL") {
  Rng init(17);
  auto gen = TabularGenerator::random(2, 3, 2, init, 0.5);
  auto pd_gen = TabularGenerator::random(2, 3, 2, init, 0.8);
  auto pd = oracle::enumerate_generator(pd_gen, 2, 3);

  double kl = oracle::exact_kl(pd, oracle::enumerate_generator(gen, 2, 3));
  const double kl0 = kl;
  for (int step = 0; step < 100; ++step) {
    auto ptheta = oracle::enumerate_generator(gen, 2, 3);
    auto dstar = oracle::optimal_discriminator(pd, ptheta);
    auto dir = oracle::exact_maligan_limit(gen, dstar);
    auto theta = gen.params().flat_values();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += 0.1 * dir.values[i];
    gen.params().set_flat_values(theta);
    const double next = oracle::exact_kl(pd, oracle::enumerate_generator(gen, 2, 3));
    CHECK(next < kl + 1e-12);
    kl = next;
  }
  CHECK(kl < 0.5 * kl0);
}

TEST_CASE("mixed estimator: full clamp is exactly teacher forcing") {
  Rng init(19);
  auto gen = TabularGenerator::random(3, 4, 2, init);
  Rng data(20);
  std::vector<Sequence> real;
  for (int i = 0; i < 6; ++i) real.push_back(gen.sample(data));
  Rng rng(21);
  auto g_mixed = mixed_mle_mali_grad(gen, const_score(0.9), real, 4, 4, 0.0, rng);
  auto g_mle = mle_grad(gen, real);
  REQUIRE(g_mixed.values.size() == g_mle.values.size());
  for (std::size_t i = 0; i < g_mle.values.size(); ++i)
    CHECK(g_mixed.values[i] == g_mle.values[i]);  // identical arithmetic
}

TEST_CASE("mixed estimator: zero clamp on one sample matches the sequence-level estimator") {
  Rng init(23);
  auto gen = TabularGenerator::random(2, 3, 1, init);
  ScoreFn score = [](const Sequence& x) {
    return 0.3 + 0.1 * static_cast<double>(x[0] + x[1] + x[2]);
  };
  std::vector<Sequence> real = {{1, 0, 1}};
  Rng rng_a(25), rng_b(25);
  auto g_mixed = mixed_mle_mali_grad(gen, score, real, 0, 8, 0.0, rng_a);
  std::vector<Sequence> completions;
  for (int j = 0; j < 8; ++j) completions.push_back(gen.clamped_sample(real[0], 0, rng_b));
  auto g_mali = maligan_grad(gen, score, completions, 0.0);
  check_close(g_mixed.values, g_mali.values, 1e-12);
}

TEST_CASE("mixed estimator: degenerate completion groups cancel at b = 1") {
  Rng init(27);
  auto gen = TabularGenerator::random(2, 3, 1, init);
  Rng data(28);
  std::vector<Sequence> real;
  for (int i = 0; i < 4; ++i) real.push_back(gen.sample(data));
  Rng rng(29);
  // constant D: only the teacher-forced prefix term survives
  auto g = mixed_mle_mali_grad(gen, const_score(0.4), real, 1, 4, 1.0, rng);
  GradientVector teacher(gen.param_count());
  for (const auto& y : real) {
    std::vector<double> w(y.size(), 0.0);
    w[0] = 1.0;
    teacher.axpy(1.0 / real.size(), gen.grad_log_prob_weighted(y, w).values);
  }
  check_close(g.values, teacher.values, 1e-14);

  CHECK_THROWS_AS(mixed_mle_mali_grad(gen, const_score(0.4), real, 1, 1, 1.0, rng),
                  std::invalid_argument);
}

TEST_CASE("baseline schedule: linear ramp, monotone, clamped at the end") {
  BaselineSchedule s{0.2, 1.0, 10};
  CHECK(s.at(0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.at(5) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(s.at(10) == 1.0);
  CHECK(s.at(1000) == 1.0);
  for (std::size_t u = 1; u < 20; ++u) CHECK(s.at(u) >= s.at(u - 1));
  BaselineSchedule flat{0.0, 1.0, 0};
  CHECK(flat.at(0) == 1.0);
}
