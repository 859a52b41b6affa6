#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace maligan {

using Token = int;
using Sequence = std::vector<Token>;

enum ReservedToken : Token { kBos = 0, kEos = 1, kPad = 2 };
inline constexpr std::size_t kReservedCount = 3;

/// Token table. Indices are dense and stable; 0/1/2 are reserved for
/// BOS/EOS/PAD and are never payload. On disk: one token per line, index =
/// line number (reserved tokens included).
class Vocab {
 public:
  Vocab() = default;
  static Vocab with_payload(const std::vector<std::string>& payload_tokens);
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  Token id(const std::string& token) const;
  const std::string& token(Token id) const;
  bool contains(Token id) const { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t payload_size() const { return tokens_.size() - kReservedCount; }

  /// Payload token <-> dense alphabet index (payload id minus the reserved
  /// block), the coordinate system the tabular generator and oracle use.
  static Token to_alphabet(Token vocab_id) { return vocab_id - static_cast<Token>(kReservedCount); }
  static Token from_alphabet(Token alphabet_id) {
    return alphabet_id + static_cast<Token>(kReservedCount);
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Token> index_;
};

Sequence to_alphabet(const Sequence& vocab_seq);
Sequence from_alphabet(const Sequence& alphabet_seq);

struct SequenceBatch {
  enum class Provenance { Real, Generated };
  std::vector<Sequence> sequences;
  Provenance provenance = Provenance::Generated;
  std::size_t clamp_prefix = 0;  // N; 0 means free-running
};

}  // namespace maligan
