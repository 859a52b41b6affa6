#pragma once

#include "maligan/generator.hpp"
#include "maligan/gru.hpp"

namespace maligan {

/// Embedding + single GRU cell + output projection over the vocab. Operates on
/// vocab token ids; BOS and PAD are never emitted (their logits are masked),
/// EOS terminates a sample unless the model runs in fixed-length mode.
class RecurrentGenerator : public Generator {
 public:
  struct Options {
    std::size_t vocab = 0;
    std::size_t embed = 8;
    std::size_t hidden = 16;
    std::size_t max_len = 16;
    bool use_eos = true;  // fixed-length mode when false
    std::uint64_t init_seed = 1;
    double init_scale = 0.08;
  };

  explicit RecurrentGenerator(const Options& opt);

  const Options& options() const { return opt_; }

  std::size_t max_len() const override { return opt_.max_len; }
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
  Options opt_;
  GruCell gru_;
  ParamStore store_;
  std::vector<double> logit_mask_;  // 0 or -1e30 per vocab entry

  std::vector<double> step_logits(std::span<const double> h) const;
  void check_token(Token t) const;
  GradientVector taped_grad(const Sequence& x, std::span<const double> step_weights,
                            bool entropy) const;
};

}  // namespace maligan
