#pragma once

#include "maligan/corpus.hpp"
#include "maligan/exact_oracle.hpp"

namespace maligan {

/// Enumerable synthetic language: a random tabular data distribution plus an
/// i.i.d. corpus sampled from it.
struct GrammarTask {
  TabularGenerator pd_model;
  oracle::ExactDistribution pd;
  Corpus corpus;
};

/// Per-context categoricals drawn from a symmetric Dirichlet; corpus split
/// 80/10/10. Token strings are "0".."V-1".
GrammarTask synth_grammar(std::size_t vocab, std::size_t length, std::uint64_t seed,
                          double concentration, std::size_t n_samples = 2000,
                          std::size_t order = 2);

/// Binary sequences of length side*side: a random prototype pattern with
/// i.i.d. bit-flip noise, flattened row-major. Token strings are "0"/"1".
Corpus synth_grid(std::size_t side, std::size_t n_patterns, double noise, std::uint64_t seed,
                  std::size_t n_samples = 1000);

}  // namespace maligan
