#include "maligan/synth.hpp"

namespace maligan {

GrammarTask synth_grammar(std::size_t vocab, std::size_t length, std::uint64_t seed,
                          double concentration, std::size_t n_samples, std::size_t order) {
  Rng rng_model = Rng::derive(seed, 1);
  Rng rng_data = Rng::derive(seed, 2);

  GrammarTask task{TabularGenerator::dirichlet(vocab, length, order, concentration, rng_model),
                   {},
                   {}};
  task.pd = oracle::enumerate_generator(task.pd_model, vocab, length);

  std::vector<std::string> tokens;
  for (std::size_t v = 0; v < vocab; ++v) tokens.push_back(std::to_string(v));
  task.corpus.vocab = Vocab::with_payload(tokens);
  task.corpus.max_len = length;

  std::vector<Sequence> samples;
  samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i)
    samples.push_back(from_alphabet(task.pd_model.sample(rng_data)));
  split_80_10_10(std::move(samples), task.corpus);
  task.corpus.validate();
  return task;
}

Corpus synth_grid(std::size_t side, std::size_t n_patterns, double noise, std::uint64_t seed,
                  std::size_t n_samples) {
  if (n_patterns == 0) throw std::invalid_argument("synth_grid: need at least one prototype");
  if (!(noise >= 0.0 && noise <= 1.0))
    throw std::invalid_argument("synth_grid: noise must be in [0, 1]");
  const std::size_t len = side * side;
  Rng rng_proto = Rng::derive(seed, 1);
  Rng rng_data = Rng::derive(seed, 2);

  std::vector<Sequence> prototypes(n_patterns, Sequence(len));
  for (auto& p : prototypes)
    for (auto& bit : p) bit = static_cast<Token>(rng_proto.index(2));

  Corpus corpus;
  corpus.vocab = Vocab::with_payload({"0", "1"});
  corpus.max_len = len;

  std::vector<Sequence> samples;
  samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Sequence x = prototypes[rng_data.index(n_patterns)];
    for (auto& bit : x)
      if (rng_data.uniform() < noise) bit ^= 1;
    for (auto& bit : x) bit = Vocab::from_alphabet(bit);
    samples.push_back(std::move(x));
  }
  split_80_10_10(std::move(samples), corpus);
  corpus.validate();
  return corpus;
}

}  // namespace maligan
