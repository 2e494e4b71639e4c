// SPDX-License-Identifier: Apache-2.0
#include "vprompt/fusion/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "vprompt/core/errors.hpp"

namespace vprompt::fusion {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Length of a "<Region k>" / "<Mark k>" template starting at `pos`, or 0.
std::size_t template_length(std::string_view text, std::size_t pos) {
  for (std::string_view prefix : {std::string_view("<Region "), std::string_view("<Mark ")}) {
    if (text.substr(pos, prefix.size()) != prefix) continue;
    std::size_t end = pos + prefix.size();
    const std::size_t digits = end;
    while (end < text.size() && is_digit(text[end])) ++end;
    if (end > digits && end < text.size() && text[end] == '>') return end + 1 - pos;
  }
  return 0;
}

bool is_closing(const std::string& t) {
  static const std::set<std::string> closing{")", "]", "}", ",", ".", ":", ";", "!", "?", "%"};
  return closing.count(t) != 0;
}

bool is_opening(const std::string& t) { return t == "(" || t == "[" || t == "{"; }
bool is_quote(const std::string& t) { return t == "'" || t == "\"" || t == "`"; }

bool is_number(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return is_digit(c); });
}

// Coordinate lists ("[1,2],[3,4]" and "'bbox':[") are written without spaces.
bool tight_list(const std::string& prev, const std::string& t) {
  if (prev == ",") return is_number(t) || t == "[";
  return prev == ":" && t == "[";
}

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      out.emplace_back("\n");
      ++i;
    } else if (is_space(c)) {
      ++i;
    } else if (std::size_t n = c == '<' ? template_length(text, i) : 0; n > 0) {
      out.emplace_back(text.substr(i, n));
      i += n;
    } else if (is_punct(c)) {
      out.emplace_back(1, c);
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && !is_space(text[j]) && !is_punct(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    }
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  std::map<std::string, bool> quote_open;
  bool glue = true;
  const std::string* prev = nullptr;
  for (const auto& t : tokens) {
    bool closes_quote = is_quote(t) && quote_open[t];
    const bool space = !glue && t != "\n" && !is_closing(t) && !closes_quote && !(prev && tight_list(*prev, t));
    prev = &t;
    if (space) out.push_back(' ');
    out += t;
    if (is_quote(t)) quote_open[t] = !quote_open[t];
    glue = t == "\n" || is_opening(t) || (is_quote(t) && !closes_quote);
  }
  return out;
}

std::vector<std::string> Vocab::reserved_tokens() {
  std::vector<std::string> r{"<bos>", "<eos>", "<sep>", "<unk>", "<img>", "<vp>"};
  for (int k = 1; k <= kMaxMarks; ++k) r.push_back("<Region " + std::to_string(k) + ">");
  for (int k = 1; k <= kMaxMarks; ++k) r.push_back("<Mark " + std::to_string(k) + ">");
  return r;
}

Vocab Vocab::build(std::span<const std::string> texts) {
  std::vector<std::string> tokens = reserved_tokens();
  const std::set<std::string> reserved(tokens.begin(), tokens.end());
  std::set<std::string> corpus;
  for (const auto& text : texts) {
    for (auto& t : split_tokens(text)) {
      if (!reserved.count(t)) corpus.insert(std::move(t));
    }
  }
  tokens.insert(tokens.end(), corpus.begin(), corpus.end());
  return Vocab(std::move(tokens));
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const auto reserved = reserved_tokens();
  if (tokens_.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), tokens_.begin())) {
    throw ValidationError("vocab: reserved token prefix missing or reordered");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ValidationError("vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw ValidationError("vocab: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> tokenize(std::string_view text, const Vocab& vocab) {
  std::vector<int> ids;
  for (const auto& t : split_tokens(text)) ids.push_back(vocab.id(t));
  return ids;
}

std::string detokenize(std::span<const int> ids, const Vocab& vocab) {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (int id : ids) tokens.push_back(vocab.token(id));
  return join_tokens(tokens);
}

}  // namespace vprompt::fusion
