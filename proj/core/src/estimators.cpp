#include "maligan/estimators.hpp"

#include <cmath>

#include "maligan/kernels.hpp"

namespace maligan {

double ratio(double d_score, double delta) {
  if (!(d_score >= delta - 1e-12 && d_score <= 1.0 - delta + 1e-12))
    throw std::domain_error("ratio: score " + std::to_string(d_score) +
                            " outside clamp range [" + std::to_string(delta) + ", " +
                            std::to_string(1.0 - delta) + "]");
  return d_score / (1.0 - d_score);
}

std::vector<double> normalized_weights(std::span<const double> ratios, double b) {
  const std::size_t m = ratios.size();
  if (m == 0) throw std::invalid_argument("normalized_weights: empty batch");
  kernels::Accumulator total;
  double lo = ratios[0], hi = ratios[0];
  for (double r : ratios) {
    if (!(r > 0.0)) throw std::domain_error("normalized_weights: ratios must be positive");
    total.add(r);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  const double sum = total.get();
  std::vector<double> w(m);
  const double bm = b / static_cast<double>(m);
  if (!(sum > 0.0) || !std::isfinite(sum) || hi <= lo * (1.0 + 1e-12)) {
    // degenerate group: uniform 1/m - b/m keeps sum w = 1 - b
    const double u = 1.0 / static_cast<double>(m) - bm;
    w.assign(m, u);
    return w;
  }
  for (std::size_t i = 0; i < m; ++i) w[i] = ratios[i] / sum - bm;
  return w;
}

WeightedBatch WeightedBatch::build(std::vector<Sequence> batch, const ScoreFn& score, double b,
                                   double delta) {
  WeightedBatch out;
  out.sequences = std::move(batch);
  const std::size_t m = out.sequences.size();
  if (m == 0) throw std::invalid_argument("WeightedBatch: empty batch");
  out.d_scores.reserve(m);
  out.ratios.reserve(m);
  for (const auto& x : out.sequences) {
    const double d = score(x);
    out.d_scores.push_back(d);
    out.ratios.push_back(ratio(d, delta));
  }
  out.weights = normalized_weights(out.ratios, b);
  out.group.assign(m, 0);

  kernels::Accumulator zsum, wsum, w2sum, absw;
  for (std::size_t i = 0; i < m; ++i) {
    zsum.add(out.ratios[i]);
    wsum.add(out.weights[i]);
    w2sum.add(out.weights[i] * out.weights[i]);
    absw.add(std::abs(out.weights[i]));
    out.max_ratio = std::max(out.max_ratio, out.ratios[i]);
  }
  out.z_hat = zsum.get() / static_cast<double>(m);
  out.weight_sum = wsum.get();
  out.ess = w2sum.get() > 0.0 ? wsum.get() * wsum.get() / w2sum.get() : 0.0;
  const double anorm = absw.get();
  if (anorm > 0.0) {
    double h = 0.0;
    for (double wv : out.weights) {
      const double p = std::abs(wv) / anorm;
      if (p > 0.0) h -= p * std::log(p);
    }
    out.weight_entropy = h;
  }
  return out;
}

namespace {

void copy_diagnostics(GradientVector& g, const WeightedBatch& wb) {
  g.z_hat = wb.z_hat;
  g.max_ratio = wb.max_ratio;
  g.ess = wb.ess;
  g.weight_sum = wb.weight_sum;
  g.weight_entropy = wb.weight_entropy;
}

void require_finite(const GradientVector& g, std::size_t seq_index) {
  if (!g.finite())
    throw std::runtime_error("estimator: non-finite gradient from sequence " +
                             std::to_string(seq_index));
}

}  // namespace

GradientVector mle_grad(const Generator& gen, const std::vector<Sequence>& real_batch) {
  if (real_batch.empty()) throw std::invalid_argument("mle_grad: empty batch");
  GradientVector g(gen.param_count());
  const double inv_m = 1.0 / static_cast<double>(real_batch.size());
  for (std::size_t i = 0; i < real_batch.size(); ++i) {
    GradientVector gi = gen.grad_log_prob(real_batch[i]);
    require_finite(gi, i);
    g.axpy(inv_m, gi.values);
  }
  g.weight_sum = 1.0;
  return g;
}

GradientVector maligan_grad(const Generator& gen, const ScoreFn& score,
                            const std::vector<Sequence>& batch, double b, double delta) {
  WeightedBatch wb = WeightedBatch::build(batch, score, b, delta);
  GradientVector g(gen.param_count());
  for (std::size_t i = 0; i < wb.sequences.size(); ++i) {
    if (wb.weights[i] == 0.0) continue;
    GradientVector gi = gen.grad_log_prob(wb.sequences[i]);
    require_finite(gi, i);
    g.axpy(wb.weights[i], gi.values);
  }
  copy_diagnostics(g, wb);
  return g;
}

GradientVector unnormalized_importance_grad(const Generator& gen, const ScoreFn& score,
                                            const std::vector<Sequence>& batch, double delta) {
  if (batch.empty()) throw std::invalid_argument("unnormalized_importance_grad: empty batch");
  GradientVector g(gen.param_count());
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  kernels::Accumulator zsum;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double r = ratio(score(batch[i]), delta);
    zsum.add(r);
    g.max_ratio = std::max(g.max_ratio, r);
    GradientVector gi = gen.grad_log_prob(batch[i]);
    require_finite(gi, i);
    g.axpy(inv_m * r, gi.values);
  }
  g.z_hat = zsum.get() / static_cast<double>(batch.size());
  return g;
}

GradientVector reinforce_grad(const Generator& gen, const ScoreFn& score,
                              const std::vector<Sequence>& batch, RewardKind reward_kind,
                              MovingBaseline& baseline, double entropy_weight) {
  if (batch.empty()) throw std::invalid_argument("reinforce_grad: empty batch");
  const std::size_t m = batch.size();
  std::vector<double> rewards(m);
  kernels::Accumulator mean;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = score(batch[i]);
    rewards[i] = reward_kind == RewardKind::Score ? d : std::log(d);
    mean.add(rewards[i]);
  }
  baseline.observe(mean.get() / static_cast<double>(m));
  const double base = baseline.value;

  GradientVector g(gen.param_count());
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double w = rewards[i] - base;
    if (w != 0.0) {
      GradientVector gi = gen.grad_log_prob(batch[i]);
      require_finite(gi, i);
      g.axpy(inv_m * w, gi.values);
    }
    if (entropy_weight != 0.0) {
      GradientVector hi = gen.grad_entropy(batch[i]);
      require_finite(hi, i);
      g.axpy(inv_m * entropy_weight, hi.values);
    }
  }
  return g;
}

GradientVector mixed_mle_mali_grad(const Generator& gen, const ScoreFn& score,
                                   const std::vector<Sequence>& real_batch, std::size_t clamp_n,
                                   std::size_t multiplicity, double b, Rng& rng, double delta) {
  if (real_batch.empty()) throw std::invalid_argument("mixed_mle_mali_grad: empty batch");
  if (multiplicity < 2 && b > 0.0)
    throw std::invalid_argument(
        "mixed_mle_mali_grad: multiplicity must be >= 2 when the baseline is positive "
        "(group renormalization is degenerate)");
  const std::size_t m = real_batch.size();
  const double inv_m = 1.0 / static_cast<double>(m);
  GradientVector g(gen.param_count());

  kernels::Accumulator zsum;
  std::size_t ratio_count = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const Sequence& y = real_batch[i];
    const std::size_t teacher_steps = std::min(clamp_n, y.size());
    if (teacher_steps > 0) {
      std::vector<double> w(y.size(), 0.0);
      for (std::size_t t = 0; t < teacher_steps; ++t) w[t] = 1.0;
      GradientVector gi = gen.grad_log_prob_weighted(y, w);
      require_finite(gi, i);
      g.axpy(inv_m, gi.values);
    }
    if (y.size() <= clamp_n) continue;  // no free-running steps for this sample

    // group of clamped completions for this real sample
    std::vector<Sequence> completions;
    std::vector<double> ratios;
    completions.reserve(multiplicity);
    ratios.reserve(multiplicity);
    for (std::size_t j = 0; j < multiplicity; ++j) {
      completions.push_back(gen.clamped_sample(y, clamp_n, rng));
      const double r = ratio(score(completions.back()), delta);
      ratios.push_back(r);
      zsum.add(r);
      ++ratio_count;
      g.max_ratio = std::max(g.max_ratio, r);
    }
    auto weights = normalized_weights(ratios, b);
    for (std::size_t j = 0; j < multiplicity; ++j) {
      if (weights[j] == 0.0) continue;
      GradientVector gj = gen.grad_log_prob_suffix(completions[j], clamp_n);
      require_finite(gj, i);
      g.axpy(inv_m * weights[j], gj.values);
    }
  }
  if (ratio_count > 0) g.z_hat = zsum.get() / static_cast<double>(ratio_count);
  return g;
}

}  // namespace maligan
