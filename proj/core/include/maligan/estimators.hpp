#pragma once

#include <functional>

#include "maligan/generator.hpp"

namespace maligan {

inline constexpr double kClampDelta = 1e-4;

/// Discriminator scores enter the estimators through this closure so that a
/// learned model and the oracle's exact D* are interchangeable.
using ScoreFn = std::function<double(const Sequence&)>;

/// r_D = D / (1 - D). The score must already be clamped into [delta, 1-delta].
double ratio(double d_score, double delta = kClampDelta);

/// w_i = r_i / sum_j r_j - b/m, so sum w_i = 1 - b and b = 1 gives zero-sum
/// weights. A degenerate batch (all ratios at the clamp floor) falls back to
/// uniform 1/m - b/m.
std::vector<double> normalized_weights(std::span<const double> ratios, double b);

/// Scored batch with self-normalized weights and diagnostics. group ids
/// partition the batch for per-real-sample renormalization.
struct WeightedBatch {
  std::vector<Sequence> sequences;
  std::vector<double> d_scores;
  std::vector<double> ratios;
  std::vector<double> weights;
  std::vector<std::size_t> group;

  double z_hat = 0.0;
  double max_ratio = 0.0;
  double ess = 0.0;
  double weight_sum = 0.0;
  double weight_entropy = 0.0;

  static WeightedBatch build(std::vector<Sequence> batch, const ScoreFn& score, double b,
                             double delta = kClampDelta);
};

struct MovingBaseline {
  double decay = 0.9;
  double value = 0.0;
  bool primed = false;
  void observe(double reward) {
    value = primed ? decay * value + (1.0 - decay) * reward : reward;
    primed = true;
  }
};

enum class RewardKind { Score, LogScore };

/// Baseline b scheduled linearly from start to end over `ramp_updates`
/// generator updates; monotone nondecreasing, held at `end` afterwards.
struct BaselineSchedule {
  double start = 0.0;
  double end = 1.0;
  std::size_t ramp_updates = 1;
  double at(std::size_t update) const {
    if (ramp_updates == 0 || update >= ramp_updates) return end;
    return start + (end - start) * static_cast<double>(update) / static_cast<double>(ramp_updates);
  }
};

/// (1/m) sum grad log p(y_i) over a real batch.
GradientVector mle_grad(const Generator& gen, const std::vector<Sequence>& real_batch);

/// Self-normalized importance-weighted gradient over a batch sampled from the
/// current generator: sum_i w_i grad log p(x_i).
GradientVector maligan_grad(const Generator& gen, const ScoreFn& score,
                            const std::vector<Sequence>& batch, double b,
                            double delta = kClampDelta);

/// (1/m) sum r_i grad log p(x_i) — no self-normalization. Kept as the
/// comparison arm for the variance measurements.
GradientVector unnormalized_importance_grad(const Generator& gen, const ScoreFn& score,
                                            const std::vector<Sequence>& batch,
                                            double delta = kClampDelta);

/// REINFORCE contrast: (1/m) sum (reward_i - baseline) grad log p(x_i)
/// + tau * sampled grad of per-step entropies. The moving baseline is an
/// exponential average of batch-mean rewards (decay 0.9).
GradientVector reinforce_grad(const Generator& gen, const ScoreFn& score,
                              const std::vector<Sequence>& batch, RewardKind reward_kind,
                              MovingBaseline& baseline, double entropy_weight);

/// Eq-style mixed teacher-forced / free-running gradient. Every real sequence
/// longer than `clamp_n` spawns `multiplicity` clamped completions whose
/// ratios are renormalized within that group; shorter sequences contribute
/// the teacher-forced term over their full length only.
GradientVector mixed_mle_mali_grad(const Generator& gen, const ScoreFn& score,
                                   const std::vector<Sequence>& real_batch, std::size_t clamp_n,
                                   std::size_t multiplicity, double b, Rng& rng,
                                   double delta = kClampDelta);

}  // namespace maligan
