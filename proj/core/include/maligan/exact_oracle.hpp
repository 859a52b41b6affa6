#pragma once

#include "maligan/estimators.hpp"
#include "maligan/tabular_generator.hpp"

namespace maligan::oracle {

/// Dense probability table over the V^T fixed-length sequence space.
/// Sequences are coded base-V, first token most significant.
struct ExactDistribution {
  std::size_t vocab = 0;
  std::size_t length = 0;
  std::vector<double> probs;

  static constexpr std::size_t kMaxSpace = 1000000;
  static std::size_t space_size(std::size_t vocab, std::size_t length);

  std::size_t size() const { return probs.size(); }
  std::size_t encode(const Sequence& x) const;
  Sequence decode(std::size_t code) const;
  double prob(const Sequence& x) const { return probs[encode(x)]; }

  /// Probabilities nonnegative and summing to 1 within 1e-12.
  void validate() const;
};

/// Exact probability of every fixed-length sequence under the model.
ExactDistribution enumerate_generator(const Generator& gen, std::size_t vocab,
                                      std::size_t length);

ExactDistribution from_probs(std::size_t vocab, std::size_t length, std::vector<double> probs);

/// D*(x) = pd(x) / (pd(x) + pp(x)); 0/0 -> 0.5.
std::vector<double> optimal_discriminator(const ExactDistribution& pd,
                                          const ExactDistribution& pp);

/// Wrap a per-sequence score table as a ScoreFn over the same space.
ScoreFn table_score(const ExactDistribution& space, std::vector<double> d_table);

/// sum p log(p/q); errors listing offending sequences on support violation.
double exact_kl(const ExactDistribution& p, const ExactDistribution& q);

/// Z = E_pp[r_D].
double partition_z(const ExactDistribution& pp, const std::vector<double>& d_table,
                   double delta = kClampDelta);

/// Normalized q proportional to r_D * pp.
ExactDistribution augmented_target(const ExactDistribution& pp,
                                   const std::vector<double>& d_table,
                                   double delta = kClampDelta);

/// Exact finite sum  sum_x w(x) grad log p_theta(x). Requires a tabular
/// generator (exact gradients); use sampled checks for recurrent models.
GradientVector exact_expected_grad(const Generator& gen, const ExactDistribution& weighting);

/// Infinite-sample limit of the sequence-level self-normalized estimator:
/// E_q[grad log p_theta] with q proportional to r_D * p_theta.
GradientVector exact_maligan_limit(const TabularGenerator& gen,
                                   const std::vector<double>& d_table,
                                   double delta = kClampDelta);

/// Infinite-sample limit of the mixed estimator at clamp length N.
GradientVector exact_mixed_limit(const TabularGenerator& gen, const ExactDistribution& pd,
                                 const std::vector<double>& d_table, std::size_t clamp_n,
                                 double delta = kClampDelta);

/// Infinite-rollout, infinite-sample limit of the per-step weighted estimator.
GradientVector exact_per_step_limit(const TabularGenerator& gen,
                                    const std::vector<double>& d_table,
                                    double delta = kClampDelta);

/// grad_theta KL(pd || p_theta) = -E_pd[grad log p_theta].
std::vector<double> kl_gradient(const TabularGenerator& gen, const ExactDistribution& pd);

/// Inner product of an estimator limit with the exact KL descent direction
/// -grad_theta KL(pd||p_theta). Positive means the estimator pushes the
/// generator toward pd; with D = D* it equals ||grad KL||^2.
double check_descent_direction(const GradientVector& estimator_limit,
                               const TabularGenerator& gen, const ExactDistribution& pd);

/// Monte Carlo statistics of an estimator over independent minibatches.
struct EstimatorStats {
  std::vector<double> mean;
  std::vector<double> stderr_mean;
  double cov_trace = 0.0;
  double bias_l2 = 0.0;
  double max_bias_in_se = 0.0;  // max_k |mean_k - exact_k| / stderr_k
  std::size_t trials = 0;
};
EstimatorStats measure_estimator(const std::function<GradientVector(Rng&)>& draw_one,
                                 std::span<const double> exact, std::size_t trials,
                                 std::uint64_t seed);

/// Constructed instance whose r_D spikes on a region decided by the final
/// token alone; used for the variance-ordering measurements.
struct SingularInstance {
  TabularGenerator gen;
  ExactDistribution ptheta;
  std::vector<double> d_table;
};
SingularInstance make_singular_instance();

/// One pass/fail row of the oracle verification suite.
struct CheckResult {
  std::string name;
  bool pass = false;
  double residual = 0.0;
  std::string detail;
};

struct SuiteOptions {
  std::size_t instances = 100;
  std::size_t vocab = 3;
  std::size_t length = 3;
  std::size_t variance_trials = 2000;
  std::size_t variance_batch = 32;
  std::size_t rollouts = 16;
};

/// Randomized instance suite covering both theorem identities, the descent
/// guarantees of the mixed estimator at every clamp length, and the variance
/// orderings on the singular instance.
std::vector<CheckResult> run_oracle_suite(std::uint64_t seed, const SuiteOptions& opt = {});

}  // namespace maligan::oracle
