#include "maligan/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace maligan {

namespace {

bool single_char_payload(const Vocab& vocab) {
  for (std::size_t i = kReservedCount; i < vocab.size(); ++i)
    if (vocab.token(static_cast<Token>(i)).size() != 1) return false;
  return vocab.payload_size() > 0;
}

}  // namespace

const std::vector<Sequence>& Corpus::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test") return test;
  throw std::invalid_argument("Corpus::split: unknown split '" + name + "'");
}

void Corpus::validate() const {
  for (const auto* s : {&train, &valid, &test}) {
    for (const Sequence& x : *s) {
      if (x.size() > max_len)
        throw std::runtime_error("Corpus: sequence longer than max_len");
      for (Token t : x)
        if (t < static_cast<Token>(kReservedCount) || !vocab.contains(t))
          throw std::runtime_error("Corpus: token " + std::to_string(t) +
                                   " is not a payload vocab id");
    }
  }
}

std::vector<Sequence> load_sequences(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_sequences: cannot open " + path);
  const bool compact_ok = single_char_payload(vocab);
  std::vector<Sequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      out.emplace_back();
      continue;
    }
    Sequence seq;
    if (compact_ok && line.find(' ') == std::string::npos && line.size() > 1) {
      for (char c : line) seq.push_back(vocab.id(std::string(1, c)));
    } else {
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) seq.push_back(vocab.id(tok));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void save_sequences(const std::string& path, const std::vector<Sequence>& seqs,
                    const Vocab& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_sequences: cannot open " + path);
  const bool compact = single_char_payload(vocab);
  for (const Sequence& x : seqs) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!compact && i > 0) out << ' ';
      out << vocab.token(x[i]);
    }
    out << '\n';
  }
}

Corpus load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  Corpus c;
  c.vocab = Vocab::load((fs::path(dir) / "vocab.txt").string());
  c.train = load_sequences((fs::path(dir) / "train.txt").string(), c.vocab);
  c.valid = load_sequences((fs::path(dir) / "valid.txt").string(), c.vocab);
  c.test = load_sequences((fs::path(dir) / "test.txt").string(), c.vocab);
  std::ifstream meta((fs::path(dir) / "meta.txt").string());
  std::string key;
  while (meta >> key) {
    if (key == "max_len") meta >> c.max_len;
  }
  if (c.max_len == 0)
    for (const auto* s : {&c.train, &c.valid, &c.test})
      for (const auto& x : *s) c.max_len = std::max(c.max_len, x.size());
  c.validate();
  return c;
}

void save_corpus(const std::string& dir, const Corpus& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  corpus.vocab.save((fs::path(dir) / "vocab.txt").string());
  save_sequences((fs::path(dir) / "train.txt").string(), corpus.train, corpus.vocab);
  save_sequences((fs::path(dir) / "valid.txt").string(), corpus.valid, corpus.vocab);
  save_sequences((fs::path(dir) / "test.txt").string(), corpus.test, corpus.vocab);
  std::ofstream meta((fs::path(dir) / "meta.txt").string());
  meta << "max_len " << corpus.max_len << '\n';
}

void split_80_10_10(std::vector<Sequence> samples, Corpus& out) {
  const std::size_t n = samples.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_valid = n / 10;
  out.train.assign(samples.begin(), samples.begin() + n_train);
  out.valid.assign(samples.begin() + n_train, samples.begin() + n_train + n_valid);
  out.test.assign(samples.begin() + n_train + n_valid, samples.end());
}

}  // namespace maligan
