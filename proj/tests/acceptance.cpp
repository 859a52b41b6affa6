#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "maligan/exact_oracle.hpp"
#include "maligan/metrics.hpp"
#include "maligan/model_io.hpp"
#include "maligan/recurrent_generator.hpp"
#include "maligan/rollout_q.hpp"
#include "maligan/train_loop.hpp"
#include "test_util.hpp"

using namespace maligan;
namespace fs = std::filesystem;

namespace {

void verdict(int criterion, bool pass, const std::string& detail) {
  std::printf("CRITERION %d: %s  (%s)\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("maligan_acc_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const oracle::CheckResult& row(const std::vector<oracle::CheckResult>& rows,
                               const std::string& name) {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw std::runtime_error("missing oracle row " + name);
}

// shared across criteria 1 and 2: one full 100-instance suite run
const std::vector<oracle::CheckResult>& suite_rows() {
  static const std::vector<oracle::CheckResult> rows = [] {
    oracle::SuiteOptions opt;
    opt.instances = 100;
    return oracle::run_oracle_suite(7, opt);
  }();
  return rows;
}

// shared V=3, T=3 instance for the consistency measurements
struct ConsistencyInstance {
  TabularGenerator gen;
  TabularGenerator pd_gen;
  oracle::ExactDistribution ptheta, pd;
  std::vector<double> d_table;
  ScoreFn score;
};

ConsistencyInstance make_consistency_instance() {
  Rng rng(404);
  ConsistencyInstance inst{TabularGenerator::random(3, 3, 3, rng, 0.6),
                           TabularGenerator::random(3, 3, 3, rng, 0.6),
                           {},
                           {},
                           {},
                           {}};
  inst.ptheta = oracle::enumerate_generator(inst.gen, 3, 3);
  inst.pd = oracle::enumerate_generator(inst.pd_gen, 3, 3);
  inst.d_table = oracle::optimal_discriminator(inst.pd, inst.ptheta);
  inst.score = oracle::table_score(inst.ptheta, inst.d_table);
  return inst;
}

}  // namespace

TEST_CASE("criterion 1: optimal-discriminator identity on 100 enumerated instances") {
  const auto& rows = suite_rows();
  const auto& identity = row(rows, "theorem-1i-identity");
  const auto& partition = row(rows, "theorem-1i-partition");
  const bool pass = identity.pass && partition.pass;
  char buf[160];
  std::snprintf(buf, sizeof buf, "max identity residual %.3g, max |Z-1| %.3g, tolerance 1e-10",
                identity.residual, partition.residual);
  verdict(1, pass, buf);
  CHECK(pass);
}

TEST_CASE("criterion 2: descent direction for partially trained discriminators") {
  const auto& rows = suite_rows();
  const auto& basic = row(rows, "theorem-1ii-descent");
  const auto& mixed = row(rows, "theorem-2-mixed-descent");
  const bool pass = basic.pass && mixed.pass;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "min inner product %.3g (sequence-level), %.3g (mixed, all clamp lengths)",
                basic.residual, mixed.residual);
  verdict(2, pass, buf);
  CHECK(pass);
}

TEST_CASE("criterion 3: Monte Carlo estimators converge to their enumerated limits") {
  auto inst = make_consistency_instance();

  // sequence-level self-normalized, b = 0: 100 trials x 2000 samples
  auto exact_seq = oracle::exact_maligan_limit(inst.gen, inst.d_table);
  auto stats_seq = oracle::measure_estimator(
      [&](Rng& rng) {
        std::vector<Sequence> batch;
        batch.reserve(2000);
        for (int i = 0; i < 2000; ++i) batch.push_back(inst.gen.sample(rng));
        return maligan_grad(inst.gen, inst.score, batch, 0.0);
      },
      exact_seq.values, 100, 501);

  // mixed at clamp 1: 10 trials x 5 real samples x 4000 completions; the
  // self-normalization bias shrinks with the completion count, so the sample
  // budget goes into the groups rather than the trials
  auto exact_mixed = oracle::exact_mixed_limit(inst.gen, inst.pd, inst.d_table, 1);
  auto stats_mixed = oracle::measure_estimator(
      [&](Rng& rng) {
        std::vector<Sequence> real;
        real.reserve(5);
        for (int i = 0; i < 5; ++i) real.push_back(inst.pd_gen.sample(rng));
        return mixed_mle_mali_grad(inst.gen, inst.score, real, 1, 4000, 0.0, rng);
      },
      exact_mixed.values, 10, 503);

  // per-step rollout weights: 50 trials x 4000 sequences x 8 rollouts; the
  // batch-shared normalizer biases small batches, so m is kept large
  auto exact_step = oracle::exact_per_step_limit(inst.gen, inst.d_table);
  auto stats_step = oracle::measure_estimator(
      [&](Rng& rng) {
        std::vector<Sequence> batch;
        batch.reserve(4000);
        for (int i = 0; i < 4000; ++i) batch.push_back(inst.gen.sample(rng));
        return per_step_grad(inst.gen, inst.score, batch, 8, rng.raw());
      },
      exact_step.values, 50, 505);

  const bool pass = stats_seq.max_bias_in_se < 3.0 && stats_mixed.max_bias_in_se < 3.0 &&
                    stats_step.max_bias_in_se < 3.0;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "max |bias|/SE: %.2f (sequence-level), %.2f (mixed), %.2f (per-step); "
                "threshold 3",
                stats_seq.max_bias_in_se, stats_mixed.max_bias_in_se, stats_step.max_bias_in_se);
  verdict(3, pass, buf);
  CHECK(pass);
}

TEST_CASE("criterion 4: variance ordering on the singular-ratio instance") {
  auto inst = oracle::make_singular_instance();
  auto score = oracle::table_score(inst.ptheta, inst.d_table);
  const std::size_t m = 32;
  auto sample_batch = [&](Rng& rng) {
    std::vector<Sequence> batch;
    batch.reserve(m);
    for (std::size_t i = 0; i < m; ++i) batch.push_back(inst.gen.sample(rng));
    return batch;
  };

  auto stats_self = oracle::measure_estimator(
      [&](Rng& rng) { return maligan_grad(inst.gen, score, sample_batch(rng), 0.0); }, {},
      10000, 601);
  auto stats_unnorm = oracle::measure_estimator(
      [&](Rng& rng) { return unnormalized_importance_grad(inst.gen, score, sample_batch(rng)); },
      {}, 10000, 601);
  auto stats_step = oracle::measure_estimator(
      [&](Rng& rng) {
        auto batch = sample_batch(rng);
        return per_step_grad(inst.gen, score, batch, 16, rng.raw());
      },
      {}, 2000, 601);
  auto stats_self_small = oracle::measure_estimator(
      [&](Rng& rng) { return maligan_grad(inst.gen, score, sample_batch(rng), 0.0); }, {},
      2000, 601);

  const double ratio_norm = stats_self.cov_trace / stats_unnorm.cov_trace;
  const double ratio_step = stats_step.cov_trace / stats_self_small.cov_trace;
  const bool pass = ratio_norm < 1.0 && ratio_step < 1.0;

  RunReport report;
  report.diagnostics["variance_ratio_self_normalized_vs_unnormalized"] = ratio_norm;
  report.diagnostics["variance_ratio_per_step_vs_sequence_level"] = ratio_step;
  report.diagnostics["cov_trace_self_normalized"] = stats_self.cov_trace;
  report.diagnostics["cov_trace_unnormalized"] = stats_unnorm.cov_trace;
  report.diagnostics["cov_trace_per_step"] = stats_step.cov_trace;
  report.save("acceptance_variance_report.json");

  char buf[200];
  std::snprintf(buf, sizeof buf,
                "cov-trace ratios: self-normalized/unnormalized %.3g, per-step/sequence %.3g; "
                "written to acceptance_variance_report.json",
                ratio_norm, ratio_step);
  verdict(4, pass, buf);
  CHECK(pass);
}

TEST_CASE("criterion 5: analytic gradients match finite differences at 5 seeds") {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RecurrentGenerator::Options gopt;
    gopt.vocab = 5;
    gopt.embed = 3;
    gopt.hidden = 4;
    gopt.max_len = 4;
    gopt.init_seed = seed;
    gopt.init_scale = 0.4;
    RecurrentGenerator gen(gopt);
    Rng sampler = Rng::derive(seed, 70);
    Sequence x = gen.sample(sampler);
    auto analytic = gen.grad_log_prob(x).values;
    worst = std::max(
        worst, testutil::max_fd_rel_err(gen.params(), [&] { return gen.log_prob(x); }, analytic));

    Discriminator::Options dopt;
    dopt.vocab = 5;
    dopt.embed = 3;
    dopt.hidden = 3;
    dopt.init_seed = seed;
    dopt.init_scale = 0.4;
    Discriminator disc(dopt);
    std::vector<Sequence> real = {{3, 4, 3}, {4, 4}};
    std::vector<Sequence> fake = {{3, 3}, {4, 3, 4}};
    disc.params().zero_grads();
    disc.accumulate_objective_grad(real, fake);
    auto danalytic = disc.params().flat_grads();
    for (auto& v : danalytic) v = -v;  // store holds the descent direction
    disc.params().zero_grads();
    auto objective = [&] {
      double obj = 0.0;
      for (const auto& y : real) obj += std::log(disc.score(y));
      for (const auto& z : fake) obj += std::log(1.0 - disc.score(z));
      return obj;
    };
    worst = std::max(worst, testutil::max_fd_rel_err(disc.params(), objective, danalytic));
  }
  const bool pass = worst < 1e-4;
  char buf[120];
  std::snprintf(buf, sizeof buf, "worst relative error %.3g over 5 seeds, tolerance 1e-4", worst);
  verdict(5, pass, buf);
  CHECK(pass);
}

TEST_CASE("criterion 6: training ordering on the enumerable grammar") {
  auto out_basic = fresh_dir("order_basic");
  auto out_full = fresh_dir("order_full");

  TrainConfig base;
  base.task = "grammar";
  base.vocab = 4;
  base.max_len = 6;
  base.order = 2;
  base.concentration = 0.5;
  base.samples = 2000;
  base.m = 32;
  base.k = 1;
  base.pretrain_gen_epochs = 8;
  base.pretrain_disc_epochs = 2;
  base.iterations = 150;
  base.lr_gen = 0.05;
  base.lr_disc = 0.05;
  base.seed = 17;

  TrainConfig basic = base;
  basic.algorithm = "maligan";
  basic.estimator = "maligan-basic";
  basic.out_dir = out_basic.string();

  TrainConfig full = base;
  full.algorithm = "sequential";
  full.estimator = "mixed";
  full.n = 8;
  full.initial_clamp = -1;
  full.clamp_step = 1;
  full.out_dir = out_full.string();

  RunReport rb = run_training(basic);
  RunReport rf = run_training(full);

  const double kl_pre = rb.diagnostics.at("kl_pretrain");
  const double kl_pre_f = rf.diagnostics.at("kl_pretrain");
  const double kl_basic = rb.kl_exact;
  const double kl_full = rf.kl_exact;

  const bool shared_pretrain = kl_pre == kl_pre_f;  // identical pretraining trajectory
  const bool no_divergence = !rb.diverged && !rf.diverged;
  const bool ordered = kl_full <= 1.02 * kl_basic && kl_basic <= 1.02 * kl_pre;
  const bool pass = shared_pretrain && no_divergence && ordered;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "KL pretrain %.4f -> basic %.4f -> full %.4f; guard tripped: %s; tolerance "
                "2%% relative",
                kl_pre, kl_basic, kl_full, no_divergence ? "no" : "yes");
  verdict(6, pass, buf);
  CHECK(pass);
  fs::remove_all(out_basic);
  fs::remove_all(out_full);
}

TEST_CASE("criterion 7: algorithm boundary identities") {
  // frozen clamp at T with zero decrement must replay pure MLE bit for bit
  auto out_a = fresh_dir("bound_a");
  auto out_b = fresh_dir("bound_b");
  TrainConfig a;
  a.task = "grammar";
  a.vocab = 3;
  a.max_len = 4;
  a.concentration = 0.4;
  a.samples = 600;
  a.m = 16;
  a.pretrain_gen_epochs = 4;
  a.pretrain_disc_epochs = 2;
  a.iterations = 8;
  a.disc_embed = 4;
  a.disc_hidden = 6;
  a.seed = 23;
  a.algorithm = "sequential";
  a.estimator = "mixed";
  a.clamp_step = 0;
  a.initial_clamp = -1;
  a.b_end = 0.0;
  a.out_dir = out_a.string();
  TrainConfig b = a;
  b.algorithm = "maligan";
  b.estimator = "mle";
  b.clamp_step = 1;
  b.out_dir = out_b.string();

  Trainer ta(a, load_task(a));
  Trainer tb(b, load_task(b));
  ta.run();
  tb.run();
  const bool bit_identical =
      ta.generator().params().flat_values() == tb.generator().params().flat_values();

  // an uninformative discriminator with b = 0 is the self-sample MLE gradient
  Rng init(29);
  auto gen = TabularGenerator::random(3, 4, 2, init);
  Rng rng(31);
  std::vector<Sequence> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(gen.sample(rng));
  auto g_mali = maligan_grad(gen, [](const Sequence&) { return 0.5; }, batch, 0.0);
  auto g_mle = mle_grad(gen, batch);
  double worst = 0.0;
  for (std::size_t i = 0; i < g_mali.values.size(); ++i)
    worst = std::max(worst, std::abs(g_mali.values[i] - g_mle.values[i]));

  const bool pass = bit_identical && worst < 1e-12;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "frozen-clamp run %s pure MLE; uninformative-D residual %.3g (tol 1e-12)",
                bit_identical ? "bit-identical to" : "DIFFERS from", worst);
  verdict(7, pass, buf);
  CHECK(pass);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("criterion 8: weight normalization algebra") {
  Rng rng(37);
  double worst_scale = 0.0, worst_sum = 0.0, worst_zero = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t m = 2 + rng.index(30);
    std::vector<double> r(m), rs(m);
    const double c = std::exp(rng.uniform(-6.0, 6.0));
    for (std::size_t i = 0; i < m; ++i) {
      r[i] = std::exp(rng.uniform(-5.0, 5.0));
      rs[i] = c * r[i];
    }
    const double b = rng.uniform(0.0, 1.0);
    auto w = normalized_weights(r, b);
    auto ws = normalized_weights(rs, b);
    double total = 0.0, total_zero = 0.0;
    auto wz = normalized_weights(r, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
      worst_scale = std::max(worst_scale, std::abs(w[i] - ws[i]));
      total += w[i];
      total_zero += wz[i];
    }
    worst_sum = std::max(worst_sum, std::abs(total - (1.0 - b)));
    worst_zero = std::max(worst_zero, std::abs(total_zero));
  }
  const bool pass = worst_scale < 1e-12 && worst_sum < 1e-12 && worst_zero < 1e-12;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "scaling residual %.3g, sum residual %.3g, zero-sum residual %.3g (tol 1e-12)",
                worst_scale, worst_sum, worst_zero);
  verdict(8, pass, buf);
  CHECK(pass);
}

TEST_CASE("criterion 9: workbench contract") {
  const bool header_ok =
      std::string(MetricsWriter::kHeader) ==
      "iteration,disc_obj,z_hat,ess,b,N,kl_exact,valid_nll,test_nll,wallclock_s";

  // checkpoint round trip, bit for bit
  Rng init(41);
  auto gen = TabularGenerator::random(4, 5, 2, init, 1.3);
  auto dir = fresh_dir("wb");
  save_model((dir / "model").string(), gen);
  auto loaded = load_model((dir / "model").string());
  const bool ckpt_ok = loaded->params().flat_values() == gen.params().flat_values();
  fs::remove_all(dir);

  const double b = bleu2({{3, 4, 5}}, {{3, 4, 6}});
  const bool bleu_ok = std::abs(b - std::sqrt(1.0 / 3.0)) < 1e-12;

  const std::string cmd =
      std::string(MALIGAN_CLI_PATH) + " oracle-check --seed 7 > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const bool cli_ok = WEXITSTATUS(status) == 0;

  const bool pass = header_ok && ckpt_ok && bleu_ok && cli_ok;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "csv header %s, checkpoint round trip %s, bleu fixture %s, oracle-check exit %s",
                header_ok ? "ok" : "BAD", ckpt_ok ? "ok" : "BAD", bleu_ok ? "ok" : "BAD",
                cli_ok ? "0" : "NONZERO");
  verdict(9, pass, buf);
  CHECK(pass);
}
