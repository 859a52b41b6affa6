#pragma once

#include "maligan/gru.hpp"
#include "maligan/sequence.hpp"

namespace maligan {

/// Sequence scorer D(x) in [delta, 1-delta]: embedding, bidirectional GRU
/// encoder, logistic head on the concatenated final hidden states.
class Discriminator {
 public:
  struct Options {
    std::size_t vocab = 0;
    std::size_t embed = 8;
    std::size_t hidden = 16;
    double clamp_delta = 1e-4;
    std::uint64_t init_seed = 2;
    double init_scale = 0.08;
  };

  explicit Discriminator(const Options& opt);

  const Options& options() const { return opt_; }
  double clamp_delta() const { return opt_.clamp_delta; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Deterministic clamped score; errors on an empty sequence.
  double score(const Sequence& x) const;

  /// One ascent step on sum log D(y) + sum log(1 - D(x)). Accumulates the
  /// descent gradient of the negated objective into the store (callers then
  /// apply an optimizer step) and returns the pre-step objective value.
  double accumulate_objective_grad(const std::vector<Sequence>& real,
                                   const std::vector<Sequence>& fake);

 private:
  Options opt_;
  GruCell fwd_, bwd_;
  ParamStore store_;

  void check_sequence(const Sequence& x) const;
  std::vector<double> encode(const Sequence& x) const;  // concat final states
  ad::Var score_var(ad::Tape& tape, const GruCell::TapeVars& fv, const GruCell::TapeVars& bv,
                    ad::Var emb, ad::Var head_w, ad::Var head_b, const Sequence& x) const;
};

}  // namespace maligan
