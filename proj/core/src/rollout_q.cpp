#include "maligan/rollout_q.hpp"

#include <cmath>

#include "maligan/kernels.hpp"

namespace maligan {

QEstimate estimate_q(const Generator& gen, const ScoreFn& score, const Sequence& seq,
                     std::size_t t, std::size_t n_rollouts, Rng& rng, double delta) {
  if (t > seq.size()) throw std::invalid_argument("estimate_q: position beyond sequence end");
  if (t == 0) throw std::invalid_argument("estimate_q: position must name an action (t >= 1)");
  if (n_rollouts < 1) throw std::invalid_argument("estimate_q: n_rollouts must be >= 1");
  QEstimate q;
  q.action = seq[t - 1];
  q.position = t;
  if (t == seq.size()) {
    // empty completion: every rollout is the sequence itself
    q.rollouts = n_rollouts;
    q.q_mean = ratio(score(seq), delta);
    q.q_stderr = 0.0;
    return q;
  }
  q.rollouts = n_rollouts;
  kernels::Accumulator sum, sum2;
  for (std::size_t j = 0; j < n_rollouts; ++j) {
    const Sequence completed = gen.clamped_sample(seq, t, rng);
    const double r = ratio(score(completed), delta);
    sum.add(r);
    sum2.add(r * r);
  }
  const double n = static_cast<double>(n_rollouts);
  q.q_mean = sum.get() / n;
  if (n_rollouts > 1) {
    const double var = std::max(0.0, (sum2.get() - n * q.q_mean * q.q_mean) / (n - 1.0));
    q.q_stderr = std::sqrt(var / n);
  }
  return q;
}

GradientVector per_step_grad(const Generator& gen, const ScoreFn& score,
                             const std::vector<Sequence>& batch, std::size_t n_rollouts,
                             std::uint64_t seed, double delta) {
  if (batch.empty()) throw std::invalid_argument("per_step_grad: empty batch");
  const std::size_t m = batch.size();

  std::vector<std::vector<double>> q(m);
  kernels::Accumulator q_total;
  double total_len = 0.0;
  double q_max = 0.0;
  const double floor = delta / (1.0 - delta);
  for (std::size_t i = 0; i < m; ++i) {
    const Sequence& x = batch[i];
    q[i].resize(x.size());
    total_len += static_cast<double>(x.size());
    for (std::size_t t = 1; t <= x.size(); ++t) {
      Rng stream = Rng::derive(seed, i, t);
      const QEstimate e = estimate_q(gen, score, x, t, n_rollouts, stream, delta);
      q[i][t - 1] = e.q_mean;
      q_total.add(e.q_mean);
      q_max = std::max(q_max, e.q_mean);
    }
  }

  double q_sum = q_total.get();
  if (q_max <= floor * (1.0 + 1e-12)) {
    // all Q at the clamp floor: uniform weights
    for (auto& qi : q)
      for (auto& v : qi) v = 1.0;
    q_sum = total_len;
  }
  const double scale = total_len / (static_cast<double>(m) * q_sum);

  GradientVector g(gen.param_count());
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> w(q[i]);
    for (auto& v : w) v *= scale;
    GradientVector gi = gen.grad_log_prob_weighted(batch[i], w);
    if (!gi.finite())
      throw std::runtime_error("per_step_grad: non-finite gradient from sequence " +
                               std::to_string(i));
    g.axpy(1.0, gi.values);
  }
  g.z_hat = q_sum / total_len;
  g.max_ratio = q_max;
  g.weight_sum = scale * q_sum;
  return g;
}

}  // namespace maligan
