// SPDX-License-Identifier: Apache-2.0
#include "vprompt/metrics/text_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>

#include "vprompt/core/errors.hpp"
#include "vprompt/fusion/tokenizer.hpp"
#include "vprompt/metrics/stemmer.hpp"

namespace vprompt::metrics {

namespace {

void check_corpus(const std::vector<std::string>& candidates, const References& references, const char* metric) {
  if (candidates.size() != references.size()) {
    throw ValidationError(std::string(metric) + ": " + std::to_string(candidates.size()) + " candidates but " +
                          std::to_string(references.size()) + " reference sets");
  }
  if (candidates.empty()) throw ValidationError(std::string(metric) + ": empty corpus");
  for (std::size_t i = 0; i < references.size(); ++i) {
    if (references[i].empty())
      throw ValidationError(std::string(metric) + ": no reference for candidate " + std::to_string(i));
  }
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

using NgramCounts = std::map<Tokens, int>;

NgramCounts ngrams(const Tokens& t, int n) {
  NgramCounts out;
  const std::size_t len = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + len <= t.size(); ++i)
    ++out[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i + len))];
  return out;
}

std::size_t lcs(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> row(b.size() + 1, 0), prev(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      row[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], row[j - 1]);
    }
    std::swap(row, prev);
  }
  return prev[b.size()];
}

}  // namespace

Tokens tokenize(const std::string& text) { return fusion::split_tokens(text); }

Tokens normalized_tokens(const std::string& text) {
  Tokens out;
  for (const auto& t : fusion::split_tokens(text)) {
    if (std::none_of(t.begin(), t.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); })) continue;
    out.push_back(porter_stem(t));
  }
  return out;
}

double bleu(const std::vector<std::string>& candidates, const References& references, int n) {
  check_corpus(candidates, references, "bleu");
  if (n < 1 || n > 4) throw ValidationError("bleu: n must be in 1..4");
  std::vector<double> clipped(static_cast<std::size_t>(n), 0.0), total(static_cast<std::size_t>(n), 0.0);
  double c_len = 0.0, r_len = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const Tokens cand = tokenize(candidates[s]);
    std::vector<Tokens> refs;
    for (const auto& r : references[s]) refs.push_back(tokenize(r));
    c_len += static_cast<double>(cand.size());
    std::size_t closest = refs[0].size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) {
        return std::llabs(static_cast<long long>(len) - static_cast<long long>(cand.size()));
      };
      if (d(r.size()) < d(closest) || (d(r.size()) == d(closest) && r.size() < closest)) closest = r.size();
    }
    r_len += static_cast<double>(closest);
    for (int k = 1; k <= n; ++k) {
      const auto counts = ngrams(cand, k);
      std::map<Tokens, int> max_ref;
      for (const auto& r : refs) {
        for (const auto& [g, c] : ngrams(r, k)) max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto& [g, c] : counts) {
        auto it = max_ref.find(g);
        clipped[static_cast<std::size_t>(k - 1)] += it == max_ref.end() ? 0 : std::min(c, it->second);
        total[static_cast<std::size_t>(k - 1)] += c;
      }
    }
  }
  if (c_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    if (clipped[static_cast<std::size_t>(k)] == 0.0) return 0.0;
    log_sum += std::log(clipped[static_cast<std::size_t>(k)] / total[static_cast<std::size_t>(k)]);
  }
  const double bp = std::exp(std::min(0.0, 1.0 - r_len / c_len));
  return bp * std::exp(log_sum / n);
}

double rouge_l(const std::vector<std::string>& candidates, const References& references, double beta) {
  check_corpus(candidates, references, "rouge_l");
  double sum = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const Tokens cand = tokenize(candidates[s]);
    double best = 0.0;
    for (const auto& ref_text : references[s]) {
      const Tokens ref = tokenize(ref_text);
      const std::size_t l = lcs(cand, ref);
      if (l == 0) continue;
      const double p = static_cast<double>(l) / static_cast<double>(cand.size());
      const double r = static_cast<double>(l) / static_cast<double>(ref.size());
      best = std::max(best, (1 + beta * beta) * p * r / (r + beta * beta * p));
    }
    sum += best;
  }
  return sum / static_cast<double>(candidates.size());
}

namespace {

// Branch-and-bound over candidate positions; objective is lexicographic
// (exact matches max, stem matches max, chunks min).
class MeteorAligner {
 public:
  MeteorAligner(const Tokens& cand, const Tokens& ref) : n_(cand.size()), m_(ref.size()), used_(ref.size(), false) {
    std::vector<std::string> cl, rl, cs, rs;
    for (const auto& t : cand) cl.push_back(lower(t));
    for (const auto& t : ref) rl.push_back(lower(t));
    for (const auto& t : cl) cs.push_back(porter_stem(t));
    for (const auto& t : rl) rs.push_back(porter_stem(t));
    kind_.assign(n_, std::vector<int>(m_, 0));
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) kind_[i][j] = cl[i] == rl[j] ? 2 : (cs[i] == rs[j] ? 1 : 0);
    }
  }

  void run() { search(0, 0, 0, 0, -1, -1); }
  std::size_t exact() const { return best_e_; }
  std::size_t stem() const { return best_s_; }
  std::size_t chunks() const { return best_c_; }

 private:
  bool better(std::size_t e, std::size_t s, std::size_t c) const {
    if (!found_) return true;
    if (e != best_e_) return e > best_e_;
    if (s != best_s_) return s > best_s_;
    return c < best_c_;
  }

  void search(std::size_t i, std::size_t e, std::size_t s, std::size_t c, long pi, long pj) {
    if (found_) {
      // Optimistic completion: every remaining candidate token matches exactly.
      std::size_t ub_e = 0, ub_any = 0;
      for (std::size_t k = i; k < n_; ++k) {
        bool has_e = false, has_any = false;
        for (std::size_t j = 0; j < m_; ++j) {
          if (used_[j]) continue;
          has_e |= kind_[k][j] == 2;
          has_any |= kind_[k][j] != 0;
        }
        ub_e += has_e;
        ub_any += has_any;
      }
      if (e + ub_e < best_e_) return;
      if (e + ub_e == best_e_ && e + s + ub_any < best_e_ + best_s_) return;
      if (e + ub_e == best_e_ && e + s + ub_any == best_e_ + best_s_ && c >= best_c_ && ub_any == 0) return;
    }
    if (i == n_) {
      if (better(e, s, c)) {
        found_ = true;
        best_e_ = e;
        best_s_ = s;
        best_c_ = c;
      }
      return;
    }
    for (std::size_t j = 0; j < m_; ++j) {
      if (used_[j] || kind_[i][j] == 0) continue;
      used_[j] = true;
      const bool extends = pi >= 0 && static_cast<long>(i) == pi + 1 && static_cast<long>(j) == pj + 1;
      search(i + 1, e + (kind_[i][j] == 2), s + (kind_[i][j] == 1), c + (extends ? 0 : 1), static_cast<long>(i),
             static_cast<long>(j));
      used_[j] = false;
    }
    search(i + 1, e, s, c, pi, pj);
  }

  std::size_t n_, m_;
  std::vector<std::vector<int>> kind_;  // 2 exact, 1 stem only, 0 none
  std::vector<bool> used_;
  bool found_ = false;
  std::size_t best_e_ = 0, best_s_ = 0, best_c_ = 0;
};

}  // namespace

MeteorStats meteor_sentence(const Tokens& candidate, const Tokens& reference) {
  MeteorStats st;
  st.candidate_len = candidate.size();
  st.reference_len = reference.size();
  if (candidate.empty() || reference.empty()) return st;
  MeteorAligner aligner(candidate, reference);
  aligner.run();
  st.matches = aligner.exact() + aligner.stem();
  st.chunks = aligner.chunks();
  if (st.matches == 0) return st;
  const double m = static_cast<double>(st.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(st.chunks) / m;
  st.score = fmean * (1.0 - 0.5 * frag * frag * frag);
  return st;
}

double meteor_simplified(const std::vector<std::string>& candidates, const References& references) {
  check_corpus(candidates, references, "meteor");
  double sum = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const Tokens cand = tokenize(candidates[s]);
    double best = 0.0;
    for (const auto& r : references[s]) best = std::max(best, meteor_sentence(cand, tokenize(r)).score);
    sum += best;
  }
  return sum / static_cast<double>(candidates.size());
}

double cider(const std::vector<std::string>& candidates, const References& references, bool gaussian_penalty,
             double sigma) {
  check_corpus(candidates, references, "cider");
  if (references.size() < 2) throw ValidationError("cider: needs at least two reference sets for document frequencies");
  if (!(sigma > 0)) throw ValidationError("cider: sigma must be positive");
  constexpr int kMaxN = 4;
  const double log_docs = std::log(static_cast<double>(references.size()));

  std::vector<std::vector<Tokens>> ref_tokens(references.size());
  std::map<Tokens, int> df;
  for (std::size_t s = 0; s < references.size(); ++s) {
    std::set<Tokens> seen;
    for (const auto& r : references[s]) {
      ref_tokens[s].push_back(tokenize(r));
      for (int n = 1; n <= kMaxN; ++n) {
        for (const auto& [g, _] : ngrams(ref_tokens[s].back(), n)) seen.insert(g);
      }
    }
    for (const auto& g : seen) ++df[g];
  }
  auto idf = [&](const Tokens& g) {
    auto it = df.find(g);
    return log_docs - std::log(std::max(1.0, it == df.end() ? 0.0 : static_cast<double>(it->second)));
  };
  struct Vec {
    std::map<Tokens, double> w;
    double norm = 0.0;
  };
  auto vectorize = [&](const Tokens& t, int n) {
    Vec v;
    for (const auto& [g, c] : ngrams(t, n)) {
      const double x = c * idf(g);
      v.w[g] = x;
      v.norm += x * x;
    }
    v.norm = std::sqrt(v.norm);
    return v;
  };

  double total = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const Tokens cand = tokenize(candidates[s]);
    double score = 0.0;
    for (int n = 1; n <= kMaxN; ++n) {
      const Vec vc = vectorize(cand, n);
      double per_n = 0.0;
      for (const auto& ref : ref_tokens[s]) {
        const Vec vr = vectorize(ref, n);
        if (vc.norm == 0.0 || vr.norm == 0.0) continue;
        double dot = 0.0;
        for (const auto& [g, x] : vc.w) {
          auto it = vr.w.find(g);
          if (it == vr.w.end()) continue;
          dot += (gaussian_penalty ? std::min(x, it->second) : x) * it->second;
        }
        double cos = dot / (vc.norm * vr.norm);
        if (gaussian_penalty) {
          const double delta = static_cast<double>(cand.size()) - static_cast<double>(ref.size());
          cos *= std::exp(-(delta * delta) / (2.0 * sigma * sigma));
        }
        per_n += cos;
      }
      score += per_n / static_cast<double>(ref_tokens[s].size());
    }
    total += 10.0 * score / kMaxN;
  }
  return total / static_cast<double>(candidates.size());
}

std::map<std::string, double> BagOfWordsEmbedder::embed(const std::string& text) const {
  std::map<std::string, double> v;
  for (const auto& t : normalized_tokens(text)) v[t] += 1.0;
  return v;
}

double semantic_similarity(const std::string& pred, const std::string& gt, const Embedder& embedder) {
  if (pred.empty() || gt.empty()) throw ValidationError("semantic_similarity: empty label");
  const auto a = embedder.embed(pred), b = embedder.embed(gt);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, x] : a) {
    na += x * x;
    auto it = b.find(k);
    if (it != b.end()) dot += x * it->second;
  }
  for (const auto& [k, x] : b) nb += x * x;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double semantic_similarity(const std::string& pred, const std::string& gt) {
  return semantic_similarity(pred, gt, BagOfWordsEmbedder{});
}

double s_iou(const std::string& pred, const std::string& gt) {
  if (pred.empty() || gt.empty()) throw ValidationError("s_iou: empty label");
  const auto ta = normalized_tokens(pred), tb = normalized_tokens(gt);
  const std::set<std::string> a(ta.begin(), ta.end()), b(tb.begin(), tb.end());
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::string normalize_label(const std::string& text) {
  std::string out;
  for (const auto& t : normalized_tokens(text)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& gts) {
  if (preds.size() != gts.size()) {
    throw ValidationError("accuracy: " + std::to_string(preds.size()) + " predictions but " +
                          std::to_string(gts.size()) + " labels");
  }
  if (preds.empty()) throw ValidationError("accuracy: empty corpus");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += normalize_label(preds[i]) == normalize_label(gts[i]);
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

}  // namespace vprompt::metrics
