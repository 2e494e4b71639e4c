// SPDX-License-Identifier: Apache-2.0
// Brute-force twins of the text metrics. Deliberately naive: linear scans,
// enumeration and dense vectors, no shared helpers with the library beyond
// the tokenizer and the stemmer.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vprompt/fusion/tokenizer.hpp"
#include "vprompt/metrics/stemmer.hpp"

namespace oracle {

using Toks = std::vector<std::string>;
using Refs = std::vector<std::vector<std::string>>;

inline Toks toks(const std::string& s) { return vprompt::fusion::split_tokens(s); }

inline Toks slice(const Toks& t, std::size_t i, std::size_t n) {
  return Toks(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i + n));
}

// Occurrences of `g` in `t`, by scanning every window.
inline int occurrences(const Toks& t, const Toks& g) {
  int c = 0;
  for (std::size_t i = 0; i + g.size() <= t.size(); ++i) c += slice(t, i, g.size()) == g;
  return c;
}

inline double bleu(const std::vector<std::string>& cands, const Refs& refs, int n) {
  std::vector<double> match(n, 0.0), total(n, 0.0);
  double c_len = 0.0, r_len = 0.0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    const Toks c = toks(cands[s]);
    c_len += c.size();
    long best = -1;
    for (const auto& r : refs[s]) {
      const long len = static_cast<long>(toks(r).size());
      const long d = std::labs(len - static_cast<long>(c.size()));
      const long bd = std::labs(best - static_cast<long>(c.size()));
      if (best < 0 || d < bd || (d == bd && len < best)) best = len;
    }
    r_len += best;
    for (int k = 1; k <= n; ++k) {
      for (std::size_t i = 0; i + k <= c.size(); ++i) {
        const Toks g = slice(c, i, k);
        total[k - 1] += 1;
        // Count each distinct n-gram once, at its first position.
        bool first = true;
        for (std::size_t j = 0; j < i; ++j) first = first && slice(c, j, k) != g;
        if (!first) continue;
        int max_ref = 0;
        for (const auto& r : refs[s]) max_ref = std::max(max_ref, occurrences(toks(r), g));
        match[k - 1] += std::min(occurrences(c, g), max_ref);
      }
    }
  }
  if (c_len == 0) return 0.0;
  double prod = 1.0;
  for (int k = 0; k < n; ++k) {
    if (match[k] == 0) return 0.0;
    prod *= match[k] / total[k];
  }
  const double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  return bp * std::pow(prod, 1.0 / n);
}

inline bool is_subsequence(const Toks& sub, const Toks& t) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < t.size() && j < sub.size(); ++i) j += t[i] == sub[j];
  return j == sub.size();
}

// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs(const Toks& a, const Toks& b) {
  std::size_t best = 0;
  for (unsigned long mask = 0; mask < (1ul << a.size()); ++mask) {
    Toks sub;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (mask >> i & 1) sub.push_back(a[i]);
    }
    if (sub.size() > best && is_subsequence(sub, b)) best = sub.size();
  }
  return best;
}

inline double rouge_l(const std::vector<std::string>& cands, const Refs& refs, double beta = 1.2) {
  double sum = 0.0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    const Toks c = toks(cands[s]);
    double best = 0.0;
    for (const auto& rt : refs[s]) {
      const Toks r = toks(rt);
      const double l = static_cast<double>(lcs(c, r));
      if (l == 0) continue;
      const double p = l / c.size(), rc = l / r.size();
      best = std::max(best, (1 + beta * beta) * p * rc / (rc + beta * beta * p));
    }
    sum += best;
  }
  return sum / cands.size();
}

inline std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

// Enumerates every one-to-one matching; picks the best (exact, stem, -chunks).
inline double meteor_sentence(const Toks& c, const Toks& r) {
  if (c.empty() || r.empty()) return 0.0;
  std::vector<long> assign(c.size(), -1);
  std::vector<bool> used(r.size(), false);
  long be = -1, bs = 0, bc = 0;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == c.size()) {
      long e = 0, s = 0, ch = 0;
      long prev_i = -2, prev_j = -2;
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (assign[k] < 0) continue;
        if (lower(c[k]) == lower(r[assign[k]])) {
          ++e;
        } else {
          ++s;
        }
        if (!(static_cast<long>(k) == prev_i + 1 && assign[k] == prev_j + 1)) ++ch;
        prev_i = static_cast<long>(k);
        prev_j = assign[k];
      }
      const bool better = be < 0 || e > be || (e == be && (s > bs || (s == bs && ch < bc)));
      if (better) {
        be = e;
        bs = s;
        bc = ch;
      }
      return;
    }
    rec(i + 1);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (used[j]) continue;
      const std::string a = lower(c[i]), b = lower(r[j]);
      if (a != b && vprompt::metrics::porter_stem(a) != vprompt::metrics::porter_stem(b)) continue;
      used[j] = true;
      assign[i] = static_cast<long>(j);
      rec(i + 1);
      assign[i] = -1;
      used[j] = false;
    }
  };
  rec(0);
  const double m = static_cast<double>(be + bs);
  if (m == 0) return 0.0;
  const double p = m / c.size(), rc = m / r.size();
  const double f = p * rc / (0.9 * p + 0.1 * rc);
  return f * (1.0 - 0.5 * std::pow(bc / m, 3.0));
}

inline double meteor(const std::vector<std::string>& cands, const Refs& refs) {
  double sum = 0.0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    double best = 0.0;
    for (const auto& r : refs[s]) best = std::max(best, meteor_sentence(toks(cands[s]), toks(r)));
    sum += best;
  }
  return sum / cands.size();
}

// Dense TF-IDF vectors over an explicit n-gram vocabulary.
inline double cider(const std::vector<std::string>& cands, const Refs& refs, bool gaussian = false,
                    double sigma = 6.0) {
  std::vector<Toks> vocab;
  auto index = [&](const Toks& g) {
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (vocab[i] == g) return i;
    }
    vocab.push_back(g);
    return vocab.size() - 1;
  };
  auto grams = [](const Toks& t, int n) {
    std::vector<Toks> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) out.push_back(slice(t, i, n));
    return out;
  };
  for (const auto& set : refs) {
    for (const auto& r : set) {
      for (int n = 1; n <= 4; ++n) {
        for (const auto& g : grams(toks(r), n)) index(g);
      }
    }
  }
  for (const auto& c : cands) {
    for (int n = 1; n <= 4; ++n) {
      for (const auto& g : grams(toks(c), n)) index(g);
    }
  }
  std::vector<double> idf(vocab.size());
  for (std::size_t v = 0; v < vocab.size(); ++v) {
    double df = 0;
    for (const auto& set : refs) {
      bool hit = false;
      for (const auto& r : set) hit = hit || occurrences(toks(r), vocab[v]) > 0;
      df += hit;
    }
    idf[v] = std::log(static_cast<double>(refs.size())) - std::log(std::max(1.0, df));
  }
  auto vec = [&](const Toks& t, int n) {
    std::vector<double> x(vocab.size(), 0.0);
    for (std::size_t v = 0; v < vocab.size(); ++v) {
      if (static_cast<int>(vocab[v].size()) == n) x[v] = occurrences(t, vocab[v]) * idf[v];
    }
    return x;
  };
  double total = 0.0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    const Toks c = toks(cands[s]);
    double score = 0.0;
    for (int n = 1; n <= 4; ++n) {
      const auto vc = vec(c, n);
      double acc = 0.0;
      for (const auto& rt : refs[s]) {
        const Toks r = toks(rt);
        const auto vr = vec(r, n);
        double dot = 0, nc = 0, nr = 0;
        for (std::size_t v = 0; v < vocab.size(); ++v) {
          dot += (gaussian ? std::min(vc[v], vr[v]) : vc[v]) * vr[v];
          nc += vc[v] * vc[v];
          nr += vr[v] * vr[v];
        }
        if (nc == 0 || nr == 0) continue;
        double cos = dot / (std::sqrt(nc) * std::sqrt(nr));
        if (gaussian) {
          const double d = static_cast<double>(c.size()) - static_cast<double>(r.size());
          cos *= std::exp(-d * d / (2 * sigma * sigma));
        }
        acc += cos;
      }
      score += acc / refs[s].size();
    }
    total += score * 10.0 / 4.0;
  }
  return total / cands.size();
}

// Stemmed word tokens, punctuation-only tokens dropped.
inline Toks words(const std::string& s) {
  Toks out;
  for (const auto& t : toks(s)) {
    if (std::any_of(t.begin(), t.end(), [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)); })) {
      out.push_back(vprompt::metrics::porter_stem(t));
    }
  }
  return out;
}

inline double semantic_similarity(const std::string& a, const std::string& b) {
  const Toks ta = words(a), tb = words(b);
  Toks vocab;
  for (const auto& t : ta) {
    if (std::find(vocab.begin(), vocab.end(), t) == vocab.end()) vocab.push_back(t);
  }
  for (const auto& t : tb) {
    if (std::find(vocab.begin(), vocab.end(), t) == vocab.end()) vocab.push_back(t);
  }
  double dot = 0, na = 0, nb = 0;
  for (const auto& v : vocab) {
    const double x = static_cast<double>(std::count(ta.begin(), ta.end(), v));
    const double y = static_cast<double>(std::count(tb.begin(), tb.end(), v));
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0 || nb == 0) return 0.0;
  return std::min(1.0, std::max(0.0, dot / std::sqrt(na * nb)));
}

inline double s_iou(const std::string& a, const std::string& b) {
  const Toks ta = words(a), tb = words(b);
  Toks uni;
  for (const auto& t : ta) {
    if (std::find(uni.begin(), uni.end(), t) == uni.end()) uni.push_back(t);
  }
  for (const auto& t : tb) {
    if (std::find(uni.begin(), uni.end(), t) == uni.end()) uni.push_back(t);
  }
  double inter = 0;
  for (const auto& t : uni) {
    inter += std::find(ta.begin(), ta.end(), t) != ta.end() && std::find(tb.begin(), tb.end(), t) != tb.end();
  }
  return uni.empty() ? 0.0 : inter / uni.size();
}

}  // namespace oracle
