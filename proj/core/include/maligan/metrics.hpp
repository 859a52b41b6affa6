#pragma once

#include "maligan/corpus.hpp"
#include "maligan/generator.hpp"

namespace maligan {

/// Map a corpus sequence (payload vocab ids) into the generator's token
/// space: alphabet ids for tabular models, vocab ids plus a terminating EOS
/// for recurrent models that use one.
Sequence model_view(const Generator& gen, const Sequence& corpus_seq);

/// Inverse of model_view, for emitting samples as corpus tokens.
Sequence corpus_view(const Generator& gen, const Sequence& model_seq);

/// Total negative log-probability of one sentence (EOS included when the
/// model emits one).
double sentence_nll(const Generator& gen, const Sequence& corpus_seq);

/// Mean sentence NLL over a split; +infinity when any sentence has
/// probability zero.
double mean_nll(const Generator& gen, const std::vector<Sequence>& split);

/// Sentence-level perplexity: exp of the mean sentence NLL.
double perplexity(const Generator& gen, const std::vector<Sequence>& split);

/// Corpus-level BLEU with uniform 1-gram/2-gram weights. Counts are clipped
/// against the pooled reference maxima, the brevity penalty is standard, and
/// a zero match count at either order is add-one smoothed.
double bleu2(const std::vector<Sequence>& hypotheses, const std::vector<Sequence>& references);

}  // namespace maligan
