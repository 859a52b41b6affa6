#pragma once

#include "maligan/estimators.hpp"

namespace maligan {

/// Monte Carlo rollout estimate of the expected ratio r_D of full sequences
/// completing the prefix that ends with action a_t. Plain rollouts from the
/// current policy; no tree statistics.
struct QEstimate {
  Token action = 0;
  std::size_t position = 0;  // prefix length t, 1-based over tokens
  std::size_t rollouts = 0;
  double q_mean = 0.0;
  double q_stderr = 0.0;
};

/// Freeze seq[0..t) and complete it n_rollouts times with the generator; the
/// realized suffix of seq is not reused. t == len(seq) short-circuits to
/// r_D(seq).
QEstimate estimate_q(const Generator& gen, const ScoreFn& score, const Sequence& seq,
                     std::size_t t, std::size_t n_rollouts, Rng& rng,
                     double delta = kClampDelta);

/// Per-step credit assignment:
///   (sum_i L_i) / (m * sum_{i,t} Q(a_t^i, s_t^i)) *
///   sum_{i,t} Q(a_t^i, s_t^i) grad log p(a_t^i | s_t^i)
/// Rollout streams are derived from (seed, i, t) so distinct positions are
/// independent. If every Q sits at the clamp floor the weights fall back to
/// uniform.
GradientVector per_step_grad(const Generator& gen, const ScoreFn& score,
                             const std::vector<Sequence>& batch, std::size_t n_rollouts,
                             std::uint64_t seed, double delta = kClampDelta);

}  // namespace maligan
