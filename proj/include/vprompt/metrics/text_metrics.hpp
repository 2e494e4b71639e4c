// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

namespace vprompt::metrics {

using Tokens = std::vector<std::string>;
/// One list of reference texts per candidate.
using References = std::vector<std::vector<std::string>>;

/// Same tokenizer the model uses.
Tokens tokenize(const std::string& text);

/// Lowercased, stemmed word tokens; punctuation-only tokens dropped.
Tokens normalized_tokens(const std::string& text);

/// Corpus BLEU with n-gram orders 1..n: clipped precisions summed over the
/// corpus, geometric mean, brevity penalty exp(min(0, 1 - r / c)) where r
/// sums the reference length closest to each candidate (shorter on ties).
double bleu(const std::vector<std::string>& candidates, const References& references, int n);

/// LCS F-measure with beta = 1.2, best reference per candidate, corpus mean.
double rouge_l(const std::vector<std::string>& candidates, const References& references, double beta = 1.2);

struct MeteorStats {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  std::size_t candidate_len = 0;
  std::size_t reference_len = 0;
  double score = 0.0;
};

/// Unigram alignment that maximizes exact matches, then stem-only matches,
/// then minimizes chunks. Score = Fmean * (1 - 0.5 (chunks / matches)^3) with
/// Fmean = 10 P R / (R + 9 P).
MeteorStats meteor_sentence(const Tokens& candidate, const Tokens& reference);
/// Best reference per candidate, corpus mean.
double meteor_simplified(const std::vector<std::string>& candidates, const References& references);

/// CIDEr over n = 1..4 with document frequencies from the references, scaled
/// to [0, 10]. With `gaussian_penalty` the CIDEr-D variant is used: candidate
/// counts are clipped by the reference counts and each cosine is weighted by
/// exp(-(len_c - len_r)^2 / (2 sigma^2)). Needs at least two reference sets.
double cider(const std::vector<std::string>& candidates, const References& references, bool gaussian_penalty = false,
             double sigma = 6.0);

/// Pluggable label embedder; vectors are sparse, keyed by dimension name.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::map<std::string, double> embed(const std::string& text) const = 0;
};

/// Term-frequency vector of normalized_tokens.
class BagOfWordsEmbedder : public Embedder {
 public:
  std::map<std::string, double> embed(const std::string& text) const override;
};

/// Cosine of the two embeddings clamped to [0, 1]. Throws ValidationError on
/// empty strings.
double semantic_similarity(const std::string& pred, const std::string& gt, const Embedder& embedder);
double semantic_similarity(const std::string& pred, const std::string& gt);

/// Intersection over union of the normalized token sets.
double s_iou(const std::string& pred, const std::string& gt);

/// Lowercase, trim, stem.
std::string normalize_label(const std::string& text);
/// Fraction of pairs whose normalized labels are equal.
double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& gts);

}  // namespace vprompt::metrics
