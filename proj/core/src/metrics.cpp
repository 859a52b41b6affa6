#include "maligan/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "maligan/kernels.hpp"
#include "maligan/recurrent_generator.hpp"
#include "maligan/tabular_generator.hpp"

namespace maligan {

Sequence model_view(const Generator& gen, const Sequence& corpus_seq) {
  if (dynamic_cast<const TabularGenerator*>(&gen)) {
    if (corpus_seq.size() != gen.max_len())
      throw std::invalid_argument("model_view: tabular model requires fixed-length sequences");
    return to_alphabet(corpus_seq);
  }
  Sequence out = corpus_seq;
  if (const auto* rec = dynamic_cast<const RecurrentGenerator*>(&gen);
      rec && rec->options().use_eos)
    out.push_back(kEos);
  return out;
}

Sequence corpus_view(const Generator& gen, const Sequence& model_seq) {
  if (dynamic_cast<const TabularGenerator*>(&gen)) return from_alphabet(model_seq);
  Sequence out;
  for (Token t : model_seq) {
    if (t == kEos || t == kPad) break;
    out.push_back(t);
  }
  return out;
}

double sentence_nll(const Generator& gen, const Sequence& corpus_seq) {
  return -gen.log_prob(model_view(gen, corpus_seq));
}

double mean_nll(const Generator& gen, const std::vector<Sequence>& split) {
  if (split.empty()) throw std::invalid_argument("mean_nll: empty split");
  kernels::Accumulator acc;
  for (const Sequence& x : split) {
    const double nll = sentence_nll(gen, x);
    if (!std::isfinite(nll)) return std::numeric_limits<double>::infinity();
    acc.add(nll);
  }
  return acc.get() / static_cast<double>(split.size());
}

double perplexity(const Generator& gen, const std::vector<Sequence>& split) {
  return std::exp(mean_nll(gen, split));
}

namespace {

using Ngram = std::vector<Token>;

std::map<Ngram, std::size_t> ngram_counts(const Sequence& x, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  if (x.size() >= n)
    for (std::size_t i = 0; i + n <= x.size(); ++i)
      ++counts[Ngram(x.begin() + i, x.begin() + i + n)];
  return counts;
}

}  // namespace

double bleu2(const std::vector<Sequence>& hypotheses, const std::vector<Sequence>& references) {
  if (hypotheses.empty() || references.empty())
    throw std::invalid_argument("bleu2: empty hypothesis or reference set");

  // pooled reference counts: per n-gram, the max count within any reference
  std::map<Ngram, std::size_t> pool[2];
  for (const Sequence& ref : references)
    for (std::size_t n = 1; n <= 2; ++n)
      for (const auto& [gram, count] : ngram_counts(ref, n)) {
        auto& slot = pool[n - 1][gram];
        slot = std::max(slot, count);
      }

  std::size_t matched[2] = {0, 0}, total[2] = {0, 0};
  std::size_t hyp_len = 0, ref_len = 0;
  for (const Sequence& hyp : hypotheses) {
    hyp_len += hyp.size();
    // closest reference length, ties to the shorter
    std::size_t best = references[0].size();
    for (const Sequence& ref : references) {
      const auto d = [&](std::size_t l) {
        return l > hyp.size() ? l - hyp.size() : hyp.size() - l;
      };
      if (d(ref.size()) < d(best) || (d(ref.size()) == d(best) && ref.size() < best))
        best = ref.size();
    }
    ref_len += best;
    for (std::size_t n = 1; n <= 2; ++n)
      for (const auto& [gram, count] : ngram_counts(hyp, n)) {
        total[n - 1] += count;
        auto it = pool[n - 1].find(gram);
        if (it != pool[n - 1].end()) matched[n - 1] += std::min(count, it->second);
      }
  }

  double log_geo = 0.0;
  for (std::size_t n = 0; n < 2; ++n) {
    double p;
    if (total[n] == 0)
      p = 1.0;
    else if (matched[n] == 0)
      p = 1.0 / static_cast<double>(total[n] + 1);
    else
      p = static_cast<double>(matched[n]) / static_cast<double>(total[n]);
    log_geo += 0.5 * std::log(p);
  }
  double bp = 0.0;
  if (hyp_len == 0) return 0.0;
  bp = hyp_len >= ref_len
           ? 1.0
           : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_geo);
}

}  // namespace maligan
