// SPDX-License-Identifier: Apache-2.0
#include "vprompt/metrics/stemmer.hpp"

#include <algorithm>
#include <cctype>
#include <utility>
#include <vector>

namespace vprompt::metrics {

namespace {

class Word {
 public:
  explicit Word(std::string w) : w_(std::move(w)) {}

  const std::string& str() const { return w_; }

  bool cons(std::size_t i) const {
    switch (w_[i]) {
      case 'a':
      case 'e':
      case 'i':
      case 'o':
      case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // Number of VC sequences in the first `len` letters.
  int measure(std::size_t len) const {
    int m = 0;
    std::size_t i = 0;
    while (i < len && cons(i)) ++i;
    while (i < len) {
      while (i < len && !cons(i)) ++i;
      if (i >= len) break;
      while (i < len && cons(i)) ++i;
      ++m;
    }
    return m;
  }

  bool vowel_in(std::size_t len) const {
    for (std::size_t i = 0; i < len; ++i) {
      if (!cons(i)) return true;
    }
    return false;
  }

  // Double consonant ending at len-1.
  bool double_cons(std::size_t len) const { return len >= 2 && w_[len - 1] == w_[len - 2] && cons(len - 1); }

  // consonant-vowel-consonant ending at len-1, last not w, x or y.
  bool cvc(std::size_t len) const {
    if (len < 3) return false;
    const std::size_t i = len - 1;
    if (!cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    const char c = w_[i];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(std::string_view s) const { return w_.size() >= s.size() && std::equal(s.rbegin(), s.rend(), w_.rbegin()); }

  std::size_t stem_len(std::string_view suffix) const { return w_.size() - suffix.size(); }

  void replace(std::string_view suffix, std::string_view with) {
    w_.resize(w_.size() - suffix.size());
    w_ += with;
  }

  void chop(std::size_t n = 1) { w_.resize(w_.size() - n); }
  char back() const { return w_.back(); }
  std::size_t size() const { return w_.size(); }

 private:
  std::string w_;
};

using Rule = std::pair<std::string_view, std::string_view>;

// The first listed suffix that matches decides; it is replaced when the stem
// measure exceeds `min_m`.
void apply_rules(Word& w, const std::vector<Rule>& rules, int min_m) {
  for (const auto& [suffix, with] : rules) {
    if (!w.ends(suffix)) continue;
    if (w.measure(w.stem_len(suffix)) > min_m) w.replace(suffix, with);
    return;
  }
}

void step1ab(Word& w) {
  if (w.back() == 's') {
    if (w.ends("sses")) {
      w.chop(2);
    } else if (w.ends("ies")) {
      w.replace("ies", "i");
    } else if (!w.ends("ss")) {
      w.chop();
    }
  }
  if (w.ends("eed")) {
    if (w.measure(w.stem_len("eed")) > 0) w.chop();
    return;
  }
  std::string_view suffix;
  if (w.ends("ed")) {
    suffix = "ed";
  } else if (w.ends("ing")) {
    suffix = "ing";
  } else {
    return;
  }
  if (!w.vowel_in(w.stem_len(suffix))) return;
  w.chop(suffix.size());
  if (w.ends("at")) {
    w.replace("at", "ate");
  } else if (w.ends("bl")) {
    w.replace("bl", "ble");
  } else if (w.ends("iz")) {
    w.replace("iz", "ize");
  } else if (w.double_cons(w.size())) {
    const char c = w.back();
    if (c != 'l' && c != 's' && c != 'z') w.chop();
  } else if (w.measure(w.size()) == 1 && w.cvc(w.size())) {
    w.replace("", "e");
  }
}

void step1c(Word& w) {
  if (w.ends("y") && w.vowel_in(w.size() - 1)) w.replace("y", "i");
}

void step2(Word& w) {
  static const std::vector<Rule> rules{{"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},   {"anci", "ance"},
                                       {"izer", "ize"},    {"bli", "ble"},     {"alli", "al"},     {"entli", "ent"},
                                       {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
                                       {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
                                       {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
                                       {"logi", "log"}};
  apply_rules(w, rules, 0);
}

void step3(Word& w) {
  static const std::vector<Rule> rules{{"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
                                       {"ical", "ic"},  {"ful", ""},   {"ness", ""}};
  apply_rules(w, rules, 0);
}

void step4(Word& w) {
  static const std::vector<std::string_view> suffixes{"al",  "ance",  "ence", "er",  "ic",  "able", "ible",
                                                      "ant", "ement", "ment", "ent", "ion", "ou",   "ism",
                                                      "ate", "iti",   "ous",  "ive", "ize"};
  for (auto suffix : suffixes) {
    if (!w.ends(suffix)) continue;
    const std::size_t stem = w.stem_len(suffix);
    if (suffix == "ion" && (stem == 0 || (w.str()[stem - 1] != 's' && w.str()[stem - 1] != 't'))) continue;
    if (w.measure(stem) > 1) w.chop(suffix.size());
    return;
  }
}

void step5(Word& w) {
  if (w.back() == 'e') {
    const int m = w.measure(w.size() - 1);
    if (m > 1 || (m == 1 && !w.cvc(w.size() - 1))) w.chop();
  }
  if (w.back() == 'l' && w.double_cons(w.size()) && w.measure(w.size()) > 1) w.chop();
}

}  // namespace

std::string porter_stem(std::string_view word) {
  std::string lower;
  bool letters = !word.empty();
  for (char c : word) {
    const auto u = static_cast<unsigned char>(c);
    lower.push_back(static_cast<char>(std::tolower(u)));
    if (!std::isalpha(u)) letters = false;
  }
  if (!letters || lower.size() <= 2) return lower;
  Word w(std::move(lower));
  step1ab(w);
  step1c(w);
  step2(w);
  step3(w);
  step4(w);
  step5(w);
  return w.str();
}

}  // namespace vprompt::metrics
