// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vprompt::fusion {

/// Largest k for which "<Region k>" and "<Mark k>" are reserved tokens.
inline constexpr int kMaxMarks = 32;

/// Splits on whitespace and punctuation. "\n" is kept as its own token and
/// "<Region k>" / "<Mark k>" are matched greedily as single tokens. Metrics
/// tokenize with this same function.
std::vector<std::string> split_tokens(std::string_view text);

/// Inverse of split_tokens up to whitespace: no space before closing
/// punctuation or after opening brackets, quotes attach by parity, and
/// newlines are not padded.
std::string join_tokens(std::span<const std::string> tokens);

class Vocab {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kSep = 2;
  static constexpr int kUnk = 3;
  static constexpr int kImg = 4;
  static constexpr int kVp = 5;

  /// Reserved tokens, then <Region 1..32>, <Mark 1..32>, then the sorted
  /// distinct tokens of `texts`.
  static Vocab build(std::span<const std::string> texts);

  /// Rebuilds from a stored token list; the reserved prefix must be intact.
  explicit Vocab(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  /// <unk> for unknown tokens.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  /// Throws ValidationError for ids outside [0, size).
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  static std::vector<std::string> reserved_tokens();

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

std::vector<int> tokenize(std::string_view text, const Vocab& vocab);
std::string detokenize(std::span<const int> ids, const Vocab& vocab);

}  // namespace vprompt::fusion
