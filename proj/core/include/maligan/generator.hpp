#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "maligan/param_store.hpp"
#include "maligan/rng.hpp"
#include "maligan/sequence.hpp"

namespace maligan {

/// Flat parameter-aligned gradient (ParamStore lexicographic order) with
/// estimator diagnostics.
struct GradientVector {
  std::vector<double> values;

  double z_hat = 0.0;           // (1/m) sum r_i
  double max_ratio = 0.0;       // max r_i
  double ess = 0.0;             // (sum w)^2 / sum w^2
  double weight_sum = 0.0;      // sum w_i
  double weight_entropy = 0.0;  // entropy of |w| distribution

  GradientVector() = default;
  explicit GradientVector(std::size_t n) : values(n, 0.0) {}

  std::size_t size() const { return values.size(); }

  void axpy(double a, std::span<const double> x) {
    if (x.size() != values.size()) throw std::invalid_argument("GradientVector::axpy: length mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += a * x[i];
  }
  void scale(double a) {
    for (auto& v : values) v *= a;
  }
  double dot(std::span<const double> x) const {
    if (x.size() != values.size()) throw std::invalid_argument("GradientVector::dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * x[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(values)); }
  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Autoregressive categorical sequence model p_theta. Tabular and recurrent
/// implementations satisfy the same contract so every estimator is generic
/// over generator kind.
class Generator {
 public:
  virtual ~Generator() = default;

  virtual std::size_t max_len() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual ParamStore& params() = 0;
  virtual const ParamStore& params() const = 0;

  /// Draw a sequence: implicit BOS start, inverse-CDF token draws in
  /// vocab-index order, stop at EOS or max_len.
  virtual Sequence sample(Rng& rng) const = 0;

  /// Agree with `prefix` on the first n positions, then free-run. n must not
  /// exceed the prefix length.
  virtual Sequence clamped_sample(const Sequence& prefix, std::size_t n, Rng& rng) const = 0;

  virtual double log_prob(const Sequence& x) const = 0;

  /// sum_t w_t * grad log p(a_t | s_t). step_weights must have one entry per
  /// token of x. Clears any pending grads in the ParamStore as a side effect.
  virtual GradientVector grad_log_prob_weighted(const Sequence& x,
                                                std::span<const double> step_weights) const = 0;

  /// Gradient of sum_t H(p(. | s_t)) along the states visited by x.
  virtual GradientVector grad_entropy(const Sequence& x) const = 0;

  /// Per-step categorical entropies along the states visited by x.
  virtual std::vector<double> step_entropies(const Sequence& x) const = 0;

  /// Frozen deep copy; later updates to this generator do not affect it.
  virtual std::unique_ptr<Generator> snapshot() const = 0;

  GradientVector grad_log_prob(const Sequence& x) const {
    std::vector<double> ones(x.size(), 1.0);
    return grad_log_prob_weighted(x, ones);
  }

  /// Gradient of log p(x_{>n} | x_{<=n}).
  GradientVector grad_log_prob_suffix(const Sequence& x, std::size_t n) const {
    std::vector<double> w(x.size(), 1.0);
    for (std::size_t t = 0; t < std::min(n, x.size()); ++t) w[t] = 0.0;
    return grad_log_prob_weighted(x, w);
  }
};

/// Frozen generator copy tagged with the training step it was taken at.
struct GeneratorSnapshot {
  std::unique_ptr<Generator> model;
  std::size_t step = 0;
};

}  // namespace maligan
