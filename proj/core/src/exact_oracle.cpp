#include "maligan/exact_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "maligan/kernels.hpp"
#include "maligan/rollout_q.hpp"

namespace maligan::oracle {

namespace {

double raw_ratio(double d) { return d / (1.0 - d); }

/// Per-component Neumaier accumulation for enumerated gradient expectations.
struct VecAccumulator {
  std::vector<double> sum, comp;
  explicit VecAccumulator(std::size_t n) : sum(n, 0.0), comp(n, 0.0) {}
  void add(double scale, std::span<const double> v) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const double x = scale * v[i];
      const double t = sum[i] + x;
      if (std::abs(sum[i]) >= std::abs(x))
        comp[i] += (sum[i] - t) + x;
      else
        comp[i] += (x - t) + sum[i];
      sum[i] = t;
    }
  }
  std::vector<double> get() const {
    std::vector<double> out(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) out[i] = sum[i] + comp[i];
    return out;
  }
};

/// Magnitude-sorted compensated sum, for the heavy-tailed r-weighted scalars.
double sorted_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end(),
            [](double a, double b) { return std::abs(a) < std::abs(b); });
  kernels::Accumulator acc;
  for (double t : terms) acc.add(t);
  return acc.get();
}

const TabularGenerator& require_tabular(const Generator& gen, const char* who) {
  const auto* tab = dynamic_cast<const TabularGenerator*>(&gen);
  if (!tab)
    throw std::invalid_argument(std::string(who) +
                                ": requires a tabular generator (exact gradients); use sampled "
                                "checks for recurrent models");
  return *tab;
}

}  // namespace

std::size_t ExactDistribution::space_size(std::size_t vocab, std::size_t length) {
  std::size_t n = 1;
  for (std::size_t t = 0; t < length; ++t) {
    if (n > kMaxSpace / vocab)
      throw std::invalid_argument("ExactDistribution: sequence space larger than " +
                                  std::to_string(kMaxSpace));
    n *= vocab;
  }
  return n;
}

std::size_t ExactDistribution::encode(const Sequence& x) const {
  if (x.size() != length)
    throw std::invalid_argument("ExactDistribution::encode: wrong sequence length");
  std::size_t code = 0;
  for (Token t : x) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab)
      throw std::out_of_range("ExactDistribution::encode: token out of alphabet");
    code = code * vocab + static_cast<std::size_t>(t);
  }
  return code;
}

Sequence ExactDistribution::decode(std::size_t code) const {
  Sequence x(length);
  for (std::size_t i = length; i-- > 0;) {
    x[i] = static_cast<Token>(code % vocab);
    code /= vocab;
  }
  return x;
}

void ExactDistribution::validate() const {
  kernels::Accumulator total;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::runtime_error("ExactDistribution: negative probability");
    total.add(p);
  }
  if (std::abs(total.get() - 1.0) > 1e-12)
    throw std::runtime_error("ExactDistribution: probabilities sum to " +
                             std::to_string(total.get()));
}

ExactDistribution enumerate_generator(const Generator& gen, std::size_t vocab,
                                      std::size_t length) {
  ExactDistribution d;
  d.vocab = vocab;
  d.length = length;
  d.probs.resize(ExactDistribution::space_size(vocab, length));
  for (std::size_t code = 0; code < d.probs.size(); ++code)
    d.probs[code] = std::exp(gen.log_prob(d.decode(code)));
  return d;
}

ExactDistribution from_probs(std::size_t vocab, std::size_t length, std::vector<double> probs) {
  ExactDistribution d;
  d.vocab = vocab;
  d.length = length;
  if (probs.size() != ExactDistribution::space_size(vocab, length))
    throw std::invalid_argument("from_probs: table size does not match V^T");
  d.probs = std::move(probs);
  d.validate();
  return d;
}

std::vector<double> optimal_discriminator(const ExactDistribution& pd,
                                          const ExactDistribution& pp) {
  if (pd.vocab != pp.vocab || pd.length != pp.length)
    throw std::invalid_argument("optimal_discriminator: mismatched sequence spaces");
  std::vector<double> d(pd.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double denom = pd.probs[i] + pp.probs[i];
    d[i] = denom > 0.0 ? pd.probs[i] / denom : 0.5;
  }
  return d;
}

ScoreFn table_score(const ExactDistribution& space, std::vector<double> d_table) {
  if (d_table.size() != space.size())
    throw std::invalid_argument("table_score: table size does not match space");
  ExactDistribution codec = space;  // captured for encode()
  return [codec, table = std::move(d_table)](const Sequence& x) { return table[codec.encode(x)]; };
}

double exact_kl(const ExactDistribution& p, const ExactDistribution& q) {
  if (p.vocab != q.vocab || p.length != q.length)
    throw std::invalid_argument("exact_kl: mismatched sequence spaces");
  std::vector<std::size_t> violations;
  kernels::Accumulator acc;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] == 0.0) continue;
    if (q.probs[i] <= 0.0) {
      violations.push_back(i);
      continue;
    }
    acc.add(p.probs[i] * std::log(p.probs[i] / q.probs[i]));
  }
  if (!violations.empty()) {
    std::ostringstream os;
    os << "exact_kl: support violation (q = 0 where p > 0) at sequences";
    for (std::size_t k = 0; k < std::min<std::size_t>(violations.size(), 8); ++k) {
      os << " [";
      for (Token t : p.decode(violations[k])) os << t << " ";
      os << "]";
    }
    if (violations.size() > 8) os << " and " << violations.size() - 8 << " more";
    throw std::domain_error(os.str());
  }
  return acc.get();
}

double partition_z(const ExactDistribution& pp, const std::vector<double>& d_table,
                   double delta) {
  (void)delta;
  if (d_table.size() != pp.size())
    throw std::invalid_argument("partition_z: table size does not match space");
  std::vector<double> terms(pp.size());
  for (std::size_t i = 0; i < pp.size(); ++i) terms[i] = pp.probs[i] * raw_ratio(d_table[i]);
  return sorted_sum(std::move(terms));
}

ExactDistribution augmented_target(const ExactDistribution& pp,
                                   const std::vector<double>& d_table, double delta) {
  ExactDistribution q = pp;
  for (std::size_t i = 0; i < q.size(); ++i) q.probs[i] = pp.probs[i] * raw_ratio(d_table[i]);
  const double z = partition_z(pp, d_table, delta);
  if (!(z > 0.0)) throw std::runtime_error("augmented_target: nonpositive partition function");
  for (auto& p : q.probs) p /= z;
  return q;
}

GradientVector exact_expected_grad(const Generator& gen, const ExactDistribution& weighting) {
  const TabularGenerator& tab = require_tabular(gen, "exact_expected_grad");
  VecAccumulator acc(tab.param_count());
  for (std::size_t code = 0; code < weighting.size(); ++code) {
    const double w = weighting.probs[code];
    if (w == 0.0) continue;
    GradientVector gi = tab.grad_log_prob(weighting.decode(code));
    acc.add(w, gi.values);
  }
  GradientVector g;
  g.values = acc.get();
  return g;
}

GradientVector exact_maligan_limit(const TabularGenerator& gen,
                                   const std::vector<double>& d_table, double delta) {
  ExactDistribution ptheta = enumerate_generator(gen, gen.alphabet(), gen.max_len());
  return exact_expected_grad(gen, augmented_target(ptheta, d_table, delta));
}

GradientVector exact_mixed_limit(const TabularGenerator& gen, const ExactDistribution& pd,
                                 const std::vector<double>& d_table, std::size_t clamp_n,
                                 double delta) {
  (void)delta;
  const std::size_t T = gen.max_len();
  const std::size_t V = gen.alphabet();
  if (pd.vocab != V || pd.length != T)
    throw std::invalid_argument("exact_mixed_limit: pd space does not match generator");
  const std::size_t n = std::min(clamp_n, T);

  VecAccumulator acc(gen.param_count());

  // teacher-forced term: E_pd[grad log p_theta(x_{<=N})]
  for (std::size_t code = 0; code < pd.size(); ++code) {
    const double w = pd.probs[code];
    if (w == 0.0) continue;
    const Sequence x = pd.decode(code);
    std::vector<double> sw(T, 0.0);
    for (std::size_t t = 0; t < n; ++t) sw[t] = 1.0;
    GradientVector gi = gen.grad_log_prob_weighted(x, sw);
    acc.add(w, gi.values);
  }

  if (n < T) {
    ExactDistribution ptheta = enumerate_generator(gen, V, T);
    if (d_table.size() != ptheta.size())
      throw std::invalid_argument("exact_mixed_limit: table size does not match space");
    const std::size_t suffix_space = ExactDistribution::space_size(V, T - n);
    const std::size_t prefix_space = ptheta.size() / suffix_space;
    std::vector<double> group_norm(prefix_space, 0.0), pd_marg(prefix_space, 0.0);
    for (std::size_t code = 0; code < ptheta.size(); ++code) {
      const std::size_t u = code / suffix_space;
      group_norm[u] += ptheta.probs[code] * raw_ratio(d_table[code]);
      pd_marg[u] += pd.probs[code];
    }
    // free-running term, renormalized within each real-prefix group
    for (std::size_t code = 0; code < ptheta.size(); ++code) {
      const std::size_t u = code / suffix_space;
      if (pd_marg[u] == 0.0 || group_norm[u] <= 0.0) continue;
      const double w =
          pd_marg[u] * ptheta.probs[code] * raw_ratio(d_table[code]) / group_norm[u];
      if (w == 0.0) continue;
      GradientVector gi = gen.grad_log_prob_suffix(ptheta.decode(code), n);
      acc.add(w, gi.values);
    }
  }

  GradientVector g;
  g.values = acc.get();
  return g;
}

GradientVector exact_per_step_limit(const TabularGenerator& gen,
                                    const std::vector<double>& d_table, double delta) {
  (void)delta;
  const std::size_t T = gen.max_len();
  const std::size_t V = gen.alphabet();
  ExactDistribution ptheta = enumerate_generator(gen, V, T);
  if (d_table.size() != ptheta.size())
    throw std::invalid_argument("exact_per_step_limit: table size does not match space");

  // level[u] at prefix length t holds sum over completions of p_theta(x) r(x),
  // i.e. p_theta(prefix) * Q(action, state)
  std::vector<double> level(ptheta.size());
  for (std::size_t code = 0; code < ptheta.size(); ++code)
    level[code] = ptheta.probs[code] * raw_ratio(d_table[code]);

  VecAccumulator acc(gen.param_count());
  kernels::Accumulator q_expect;

  for (std::size_t t = T; t >= 1; --t) {
    const std::size_t prefixes = level.size();
    for (std::size_t u = 0; u < prefixes; ++u) {
      if (level[u] == 0.0) continue;
      q_expect.add(level[u]);
      // decode the length-t prefix
      Sequence prefix(t);
      std::size_t c = u;
      for (std::size_t i = t; i-- > 0;) {
        prefix[i] = static_cast<Token>(c % V);
        c /= V;
      }
      const Token action = prefix.back();
      const std::size_t cid = gen.context_id(prefix, t - 1);
      auto p = gen.probs_for_context(cid);
      std::vector<double> grad_term(gen.param_count(), 0.0);
      for (std::size_t a = 0; a < V; ++a) grad_term[cid * V + a] = -p[a];
      grad_term[cid * V + static_cast<std::size_t>(action)] += 1.0;
      acc.add(level[u], grad_term);
    }
    // fold one level up
    if (t > 1) {
      std::vector<double> up(prefixes / V, 0.0);
      for (std::size_t u = 0; u < prefixes; ++u) up[u / V] += level[u];
      level = std::move(up);
    }
  }

  GradientVector g;
  g.values = acc.get();
  const double denom = q_expect.get();
  if (!(denom > 0.0)) throw std::runtime_error("exact_per_step_limit: zero expected Q mass");
  g.scale(static_cast<double>(T) / denom);
  return g;
}

std::vector<double> kl_gradient(const TabularGenerator& gen, const ExactDistribution& pd) {
  GradientVector g = exact_expected_grad(gen, pd);
  for (auto& v : g.values) v = -v;
  return g.values;
}

double check_descent_direction(const GradientVector& estimator_limit, const TabularGenerator& gen,
                               const ExactDistribution& pd) {
  GradientVector target = exact_expected_grad(gen, pd);  // = -grad KL(pd||p_theta)
  return estimator_limit.dot(target.values);
}

EstimatorStats measure_estimator(const std::function<GradientVector(Rng&)>& draw_one,
                                 std::span<const double> exact, std::size_t trials,
                                 std::uint64_t seed) {
  if (trials < 2) throw std::invalid_argument("measure_estimator: need at least 2 trials");
  EstimatorStats st;
  st.trials = trials;
  std::vector<double> mean, m2;
  for (std::size_t k = 0; k < trials; ++k) {
    Rng rng = Rng::derive(seed, 100, k);
    GradientVector g = draw_one(rng);
    if (mean.empty()) {
      mean.assign(g.size(), 0.0);
      m2.assign(g.size(), 0.0);
    }
    const double inv = 1.0 / static_cast<double>(k + 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = g.values[i] - mean[i];
      mean[i] += d * inv;
      m2[i] += d * (g.values[i] - mean[i]);
    }
  }
  st.mean = mean;
  st.stderr_mean.resize(mean.size());
  const double n = static_cast<double>(trials);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double var = m2[i] / (n - 1.0);
    st.cov_trace += var;
    st.stderr_mean[i] = std::sqrt(var / n);
  }
  if (!exact.empty()) {
    if (exact.size() != mean.size())
      throw std::invalid_argument("measure_estimator: exact vector length mismatch");
    double l2 = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double b = mean[i] - exact[i];
      l2 += b * b;
      const double se = std::max(st.stderr_mean[i], 1e-300);
      st.max_bias_in_se = std::max(st.max_bias_in_se, std::abs(b) / se);
    }
    st.bias_l2 = std::sqrt(l2);
  }
  return st;
}

SingularInstance make_singular_instance() {
  // r_D spikes to 999 only on sequences whose final token is 1, so the
  // reward is decided entirely by the last step while the first seven
  // tokens are noisy coin flips. Sequence-level weights drag those
  // irrelevant early steps along with every lucky sequence; per-step Q is
  // constant before the final position and keeps them at uniform weight.
  // That separation is what orders the three estimators' variances.
  TabularGenerator gen(2, 8, 3);
  Tensor& logits = gen.params().at("logits");
  for (std::size_t c = 0; c < gen.context_count(); ++c) {
    logits.values[c * 2 + 0] = std::log(0.7);
    logits.values[c * 2 + 1] = std::log(0.3);
  }
  SingularInstance inst{std::move(gen), {}, {}};
  inst.ptheta = enumerate_generator(inst.gen, 2, 8);
  inst.d_table.assign(inst.ptheta.size(), 0.5);
  for (std::size_t code = 1; code < inst.d_table.size(); code += 2)
    inst.d_table[code] = 0.999;  // odd code == last token 1
  return inst;
}

namespace {

double clampd(double d, double delta) {
  return std::min(1.0 - delta, std::max(delta, d));
}

}  // namespace

std::vector<CheckResult> run_oracle_suite(std::uint64_t seed, const SuiteOptions& opt) {
  std::vector<CheckResult> out;
  const std::size_t V = opt.vocab, T = opt.length;

  // Theorem identities on randomized tabular instances
  double worst_identity = 0.0, worst_z = 0.0;
  double min_inner_basic = std::numeric_limits<double>::infinity();
  double min_inner_mixed = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < opt.instances; ++k) {
    Rng rng = Rng::derive(seed, 7, k);
    TabularGenerator ptheta = TabularGenerator::random(V, T, T, rng, 0.6);
    TabularGenerator pprime_gen = TabularGenerator::random(V, T, T, rng, 0.6);
    TabularGenerator pd_gen = TabularGenerator::random(V, T, T, rng, 0.6);
    ExactDistribution pp = enumerate_generator(pprime_gen, V, T);
    ExactDistribution pd = enumerate_generator(pd_gen, V, T);
    ExactDistribution pt = enumerate_generator(ptheta, V, T);

    // (i): with D* between p' and pd, (1/Z) E_p'[r grad log p_theta]
    //      equals E_pd[grad log p_theta] and Z = 1
    auto dstar = optimal_discriminator(pd, pp);
    const double z = partition_z(pp, dstar);
    worst_z = std::max(worst_z, std::abs(z - 1.0));
    GradientVector lhs = exact_expected_grad(ptheta, augmented_target(pp, dstar));
    GradientVector rhs = exact_expected_grad(ptheta, pd);
    for (std::size_t i = 0; i < lhs.size(); ++i)
      worst_identity = std::max(worst_identity, std::abs(lhs.values[i] - rhs.values[i]));

    // (ii): D strictly between 0.5 and D* (now between p_theta and pd)
    auto dstar_t = optimal_discriminator(pd, pt);
    std::vector<double> d_mid(dstar_t.size());
    for (std::size_t i = 0; i < d_mid.size(); ++i)
      d_mid[i] = 0.5 + rng.uniform(0.05, 0.95) * (dstar_t[i] - 0.5);
    GradientVector est = exact_maligan_limit(ptheta, d_mid);
    min_inner_basic = std::min(min_inner_basic, check_descent_direction(est, ptheta, pd));

    // mixed estimator descent at every clamp length, with D* between p_f and pd
    const std::size_t full = pt.size();
    for (std::size_t n = 0; n <= T; ++n) {
      const std::size_t suffix_space = ExactDistribution::space_size(V, T - n);
      std::vector<double> pdm(full / suffix_space, 0.0), ptm(full / suffix_space, 0.0);
      for (std::size_t code = 0; code < full; ++code) {
        pdm[code / suffix_space] += pd.probs[code];
        ptm[code / suffix_space] += pt.probs[code];
      }
      ExactDistribution pf = pt;
      for (std::size_t code = 0; code < full; ++code) {
        const std::size_t u = code / suffix_space;
        pf.probs[code] = ptm[u] > 0.0 ? pdm[u] * pt.probs[code] / ptm[u] : 0.0;
      }
      auto dstar_f = optimal_discriminator(pd, pf);
      std::vector<double> dm(full);
      for (std::size_t i = 0; i < full; ++i)
        dm[i] = 0.5 + rng.uniform(0.05, 0.95) * (dstar_f[i] - 0.5);
      GradientVector em = exact_mixed_limit(ptheta, pd, dm, n);
      min_inner_mixed = std::min(min_inner_mixed, check_descent_direction(em, ptheta, pd));
    }
  }
  out.push_back({"theorem-1i-identity", worst_identity < 1e-10, worst_identity,
                 "max |(1/Z) E_p'[r grad log p] - E_pd[grad log p]| over instances"});
  out.push_back({"theorem-1i-partition", worst_z < 1e-10, worst_z,
                 "max |Z - 1| at the optimal discriminator"});
  out.push_back({"theorem-1ii-descent", min_inner_basic > 0.0, min_inner_basic,
                 "min inner product with the KL descent direction"});
  out.push_back({"theorem-2-mixed-descent", min_inner_mixed > 0.0, min_inner_mixed,
                 "min inner product over clamp lengths 0..T"});

  // variance orderings on the singular-ratio instance
  {
    SingularInstance inst = make_singular_instance();
    ScoreFn score = table_score(inst.ptheta, inst.d_table);
    const std::size_t m = opt.variance_batch;
    auto sample_batch = [&](Rng& rng) {
      std::vector<Sequence> batch;
      batch.reserve(m);
      for (std::size_t i = 0; i < m; ++i) batch.push_back(inst.gen.sample(rng));
      return batch;
    };
    auto stats_self = measure_estimator(
        [&](Rng& rng) { return maligan_grad(inst.gen, score, sample_batch(rng), 0.0); }, {},
        opt.variance_trials, Rng::mix(seed, 21, 0));
    auto stats_unnorm = measure_estimator(
        [&](Rng& rng) {
          return unnormalized_importance_grad(inst.gen, score, sample_batch(rng));
        },
        {}, opt.variance_trials, Rng::mix(seed, 21, 0));
    auto stats_step = measure_estimator(
        [&](Rng& rng) {
          auto batch = sample_batch(rng);
          return per_step_grad(inst.gen, score, batch, opt.rollouts, rng.raw());
        },
        {}, opt.variance_trials, Rng::mix(seed, 21, 0));
    const double ratio_norm = stats_self.cov_trace / stats_unnorm.cov_trace;
    const double ratio_step = stats_step.cov_trace / stats_self.cov_trace;
    out.push_back({"variance-self-normalized", ratio_norm < 1.0, ratio_norm,
                   "cov-trace ratio, self-normalized / unnormalized importance"});
    out.push_back({"variance-per-step", ratio_step < 1.0, ratio_step,
                   "cov-trace ratio, per-step rollout weights / sequence-level b=0"});
  }

  return out;
}

}  // namespace maligan::oracle
