#include "maligan/sequence.hpp"

#include <fstream>
#include <stdexcept>

namespace maligan {

Vocab Vocab::with_payload(const std::vector<std::string>& payload_tokens) {
  Vocab v;
  v.tokens_ = {"<bos>", "<eos>", "<pad>"};
  v.tokens_.insert(v.tokens_.end(), payload_tokens.begin(), payload_tokens.end());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    auto [_, inserted] = v.index_.emplace(v.tokens_[i], static_cast<Token>(i));
    if (!inserted) throw std::invalid_argument("Vocab: duplicate token " + v.tokens_[i]);
  }
  return v;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open vocab file: " + path);
  Vocab v;
  std::string line;
  while (std::getline(is, line)) {
    v.index_.emplace(line, static_cast<Token>(v.tokens_.size()));
    v.tokens_.push_back(line);
  }
  if (v.tokens_.size() < kReservedCount)
    throw std::runtime_error("vocab file too short (missing reserved tokens): " + path);
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open vocab file for writing: " + path);
  for (const auto& t : tokens_) os << t << "\n";
}

Token Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw std::out_of_range("Vocab: unknown token '" + token + "'");
  return it->second;
}

const std::string& Vocab::token(Token id) const {
  if (!contains(id)) throw std::out_of_range("Vocab: token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

Sequence to_alphabet(const Sequence& vocab_seq) {
  Sequence out;
  out.reserve(vocab_seq.size());
  for (Token t : vocab_seq) {
    if (t < static_cast<Token>(kReservedCount))
      throw std::invalid_argument("to_alphabet: reserved token in payload sequence");
    out.push_back(Vocab::to_alphabet(t));
  }
  return out;
}

Sequence from_alphabet(const Sequence& alphabet_seq) {
  Sequence out;
  out.reserve(alphabet_seq.size());
  for (Token t : alphabet_seq) out.push_back(Vocab::from_alphabet(t));
  return out;
}

}  // namespace maligan
