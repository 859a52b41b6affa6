#pragma once

#include "maligan/sequence.hpp"

namespace maligan {

/// Tokenized dataset with disjoint train/valid/test splits. Sequences hold
/// vocab ids (payload range, no BOS/EOS/PAD).
struct Corpus {
  Vocab vocab;
  std::vector<Sequence> train, valid, test;
  std::size_t max_len = 0;

  const std::vector<Sequence>& split(const std::string& name) const;

  /// Every token is a payload vocab id and no sequence exceeds max_len.
  void validate() const;
};

/// One sequence per line. Tokens are space-separated; when every payload
/// token is a single character (grid corpora) lines are written without
/// separators, and the loader accepts either form.
std::vector<Sequence> load_sequences(const std::string& path, const Vocab& vocab);
void save_sequences(const std::string& path, const std::vector<Sequence>& seqs,
                    const Vocab& vocab);

/// Directory layout: vocab.txt, train.txt, valid.txt, test.txt, meta.txt.
Corpus load_corpus(const std::string& dir);
void save_corpus(const std::string& dir, const Corpus& corpus);

/// Deterministic 80/10/10 partition in sample order.
void split_80_10_10(std::vector<Sequence> samples, Corpus& out);

}  // namespace maligan
