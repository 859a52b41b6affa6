#pragma once

#include "maligan/generator.hpp"

namespace maligan {

/// Enumerable autoregressive model over a payload alphabet {0..V-1}, fixed
/// sequence length, no EOS. One logit row per context, where the context is
/// the full history truncated to the last `order` tokens.
class TabularGenerator : public Generator {
 public:
  TabularGenerator(std::size_t alphabet, std::size_t length, std::size_t order);

  static TabularGenerator random(std::size_t alphabet, std::size_t length, std::size_t order,
                                 Rng& rng, double scale = 1.0);
  /// Logits set to log of per-context symmetric-Dirichlet draws.
  static TabularGenerator dirichlet(std::size_t alphabet, std::size_t length, std::size_t order,
                                    double concentration, Rng& rng);

  std::size_t alphabet() const { return alphabet_; }
  std::size_t order() const { return order_; }
  std::size_t context_count() const { return contexts_; }

  /// Context row for the prefix x[0..t).
  std::size_t context_id(const Sequence& x, std::size_t t) const;
  std::vector<double> next_token_probs(const Sequence& prefix) const;
  std::vector<double> probs_for_context(std::size_t cid) const;

  // Generator contract
  std::size_t max_len() const override { return length_; }
  std::size_t param_count() const override { return store_.flat_size(); }
  ParamStore& params() override { return store_; }
  const ParamStore& params() const override { return store_; }
  Sequence sample(Rng& rng) const override;
  Sequence clamped_sample(const Sequence& prefix, std::size_t n, Rng& rng) const override;
  double log_prob(const Sequence& x) const override;
  GradientVector grad_log_prob_weighted(const Sequence& x,
                                        std::span<const double> step_weights) const override;
  GradientVector grad_entropy(const Sequence& x) const override;
  std::vector<double> step_entropies(const Sequence& x) const override;
  std::unique_ptr<Generator> snapshot() const override;

 private:
  std::size_t alphabet_, length_, order_, contexts_;
  std::vector<std::size_t> level_offset_;  // offset of contexts of each history length
  ParamStore store_;

  const Tensor& logits() const { return store_.at("logits"); }
  Tensor& logits() { return store_.at("logits"); }
  void check_tokens(const Sequence& x) const;
};

}  // namespace maligan
