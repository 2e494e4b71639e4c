// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <span>
#include <vector>

#include "vprompt/autodiff/params.hpp"
#include "vprompt/autodiff/tensor.hpp"

namespace vprompt::fusion {

struct DecoderConfig {
  int width = 32;
  int layers = 2;
  int heads = 2;
  int ffn_hidden = 64;
  int lora_rank = 4;

  /// Positive sizes, heads divides width, rank <= min(width, head width).
  void validate() const;
  int head_width() const { return width / heads; }
};

/// Low-rank pair: delta W = B * A with A (r, in) and B (out, r).
struct LoraFactor {
  ad::Tensor a;
  ad::Tensor b;
};

struct HeadParams {
  ad::Tensor wq, wk, wv;  // (head_width, width)
  ad::Tensor bq, bk, bv;  // (head_width)
  ad::Tensor wo;          // (width, head_width)
  LoraFactor lora_q, lora_k, lora_v, lora_o;
};

struct LayerParams {
  ad::Tensor ln1_gain, ln1_bias;
  std::vector<HeadParams> heads;
  ad::Tensor ln2_gain, ln2_bias;
  ad::Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

/// Token embedding, affine projection of visual features, causal
/// transformer stack with per-head LoRA factors, and the output head.
class Decoder {
 public:
  Decoder(ad::ParameterStore& store, DecoderConfig config, int vocab_size, std::size_t feature_width,
          std::mt19937_64& rng);

  /// (T, feature_width) -> (T, width). ShapeError on width mismatch.
  ad::Tensor project(const ad::Tensor& features) const;
  ad::Tensor embed(std::span<const int> ids) const;

  /// Causal multi-head attention of layer `layer` on already-normalized rows.
  /// `adapted` adds B*A to every q, k, v and output weight.
  ad::Tensor multi_attn(const ad::Tensor& x, std::size_t layer, bool adapted) const;

  /// Adds positions, runs every block, applies the final norm: (T, width).
  ad::Tensor hidden(const ad::Tensor& rows, bool adapted = true) const;
  ad::Tensor logits(const ad::Tensor& hidden) const;

  const DecoderConfig& config() const { return config_; }
  const LayerParams& layer(std::size_t l) const { return layers_.at(l); }
  const ad::Tensor& phi_weight() const { return phi_w_; }
  const ad::Tensor& phi_bias() const { return phi_b_; }
  int vocab_size() const { return vocab_size_; }

 private:
  DecoderConfig config_;
  int vocab_size_;
  std::size_t feature_width_;
  ad::Tensor embed_;
  ad::Tensor phi_w_, phi_b_;
  std::vector<LayerParams> layers_;
  ad::Tensor lnf_gain_, lnf_bias_;
  ad::Tensor head_w_, head_b_;
};

}  // namespace vprompt::fusion
