// SPDX-License-Identifier: Apache-2.0
#include "vprompt/fusion/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "vprompt/autodiff/nn.hpp"
#include "vprompt/autodiff/ops.hpp"
#include "vprompt/core/errors.hpp"

namespace vprompt::fusion {

void DecoderConfig::validate() const {
  if (width < 1 || layers < 1 || heads < 1 || ffn_hidden < 1 || lora_rank < 1) {
    throw ValidationError("decoder: width, layers, heads, ffn_hidden and lora_rank must be >= 1");
  }
  if (width % heads != 0) {
    throw ValidationError("decoder: heads (" + std::to_string(heads) + ") must divide width (" + std::to_string(width) +
                          ")");
  }
  if (lora_rank > head_width()) {
    throw ValidationError("decoder: lora_rank " + std::to_string(lora_rank) + " exceeds head width " +
                          std::to_string(head_width()));
  }
}

namespace {

struct Init {
  ad::ParameterStore& store;
  std::mt19937_64& rng;

  ad::Tensor normal(const std::string& name, ad::Shape shape, double stddev) {
    return store.create(name, shape, ad::normal_values(ad::numel(shape), stddev, rng));
  }
  ad::Tensor constant(const std::string& name, ad::Shape shape, double value) {
    return store.create(name, shape, std::vector<double>(ad::numel(shape), value));
  }
  LoraFactor lora(const std::string& name, std::size_t in, std::size_t out, std::size_t rank) {
    return {normal(name + ".a", {rank, in}, 1.0 / std::sqrt(static_cast<double>(in))),
            constant(name + ".b", {out, rank}, 0.0)};
  }
};

ad::Tensor effective(const ad::Tensor& w, const LoraFactor& f, bool adapted) {
  return adapted ? ad::add(w, ad::matmul(f.b, f.a)) : w;
}

}  // namespace

Decoder::Decoder(ad::ParameterStore& store, DecoderConfig config, int vocab_size, std::size_t feature_width,
                 std::mt19937_64& rng)
    : config_(config), vocab_size_(vocab_size), feature_width_(feature_width) {
  config_.validate();
  if (vocab_size < 1 || feature_width < 1) throw ValidationError("decoder: vocab and feature width must be >= 1");
  const auto d = static_cast<std::size_t>(config_.width);
  const auto dh = static_cast<std::size_t>(config_.head_width());
  const auto f = static_cast<std::size_t>(config_.ffn_hidden);
  const auto r = static_cast<std::size_t>(config_.lora_rank);
  const auto v = static_cast<std::size_t>(vocab_size);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  Init init{store, rng};

  embed_ = init.normal("embed.tokens", {v, d}, 1.0);
  phi_w_ = init.normal("phi.weight", {d, feature_width}, 1.0 / std::sqrt(static_cast<double>(feature_width)));
  phi_b_ = init.constant("phi.bias", {d}, 0.0);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string base = "decoder.layer" + std::to_string(l);
    LayerParams layer;
    layer.ln1_gain = init.constant(base + ".ln1.gain", {d}, 1.0);
    layer.ln1_bias = init.constant(base + ".ln1.bias", {d}, 0.0);
    for (int h = 0; h < config_.heads; ++h) {
      const std::string hb = base + ".head" + std::to_string(h);
      HeadParams head;
      head.wq = init.normal(hb + ".wq", {dh, d}, sd);
      head.wk = init.normal(hb + ".wk", {dh, d}, sd);
      head.wv = init.normal(hb + ".wv", {dh, d}, sd);
      head.bq = init.constant(hb + ".bq", {dh}, 0.0);
      head.bk = init.constant(hb + ".bk", {dh}, 0.0);
      head.bv = init.constant(hb + ".bv", {dh}, 0.0);
      head.wo = init.normal(hb + ".wo", {d, dh}, 1.0 / std::sqrt(static_cast<double>(d)));
      head.lora_q = init.lora(hb + ".lora_q", d, dh, r);
      head.lora_k = init.lora(hb + ".lora_k", d, dh, r);
      head.lora_v = init.lora(hb + ".lora_v", d, dh, r);
      head.lora_o = init.lora(hb + ".lora_o", dh, d, r);
      layer.heads.push_back(std::move(head));
    }
    layer.ln2_gain = init.constant(base + ".ln2.gain", {d}, 1.0);
    layer.ln2_bias = init.constant(base + ".ln2.bias", {d}, 0.0);
    layer.ffn_w1 = init.normal(base + ".ffn.w1", {f, d}, sd);
    layer.ffn_b1 = init.constant(base + ".ffn.b1", {f}, 0.0);
    layer.ffn_w2 = init.normal(base + ".ffn.w2", {d, f}, 1.0 / std::sqrt(static_cast<double>(f)));
    layer.ffn_b2 = init.constant(base + ".ffn.b2", {d}, 0.0);
    layers_.push_back(std::move(layer));
  }
  lnf_gain_ = init.constant("decoder.ln_f.gain", {d}, 1.0);
  lnf_bias_ = init.constant("decoder.ln_f.bias", {d}, 0.0);
  head_w_ = init.normal("lm_head.weight", {v, d}, sd);
  head_b_ = init.constant("lm_head.bias", {v}, 0.0);
}

ad::Tensor Decoder::project(const ad::Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != feature_width_) {
    throw ShapeError("project: expected (T," + std::to_string(feature_width_) + ") features, got " +
                     ad::shape_str(features.shape()));
  }
  return ad::linear(features, phi_w_, phi_b_);
}

ad::Tensor Decoder::embed(std::span<const int> ids) const { return ad::embedding(embed_, ids); }

ad::Tensor Decoder::multi_attn(const ad::Tensor& x, std::size_t layer, bool adapted) const {
  const auto& params = layers_.at(layer);
  const auto dh = static_cast<std::size_t>(config_.head_width());
  ad::Tensor out;
  for (const auto& h : params.heads) {
    ad::Tensor q = ad::linear(x, effective(h.wq, h.lora_q, adapted), h.bq);
    ad::Tensor k = ad::linear(x, effective(h.wk, h.lora_k, adapted), h.bk);
    ad::Tensor v = ad::linear(x, effective(h.wv, h.lora_v, adapted), h.bv);
    ad::Tensor head_out = ad::linear(ad::attention(q, k, v, dh, true), effective(h.wo, h.lora_o, adapted));
    out = out.node() ? ad::add(out, head_out) : head_out;
  }
  return out;
}

ad::Tensor Decoder::hidden(const ad::Tensor& rows, bool adapted) const {
  if (rows.rank() != 2 || rows.dim(1) != static_cast<std::size_t>(config_.width)) {
    throw ShapeError("decoder: expected (T," + std::to_string(config_.width) + ") rows, got " +
                     ad::shape_str(rows.shape()));
  }
  ad::Tensor x = ad::add(rows, ad::sinusoidal_positions(rows.dim(0), rows.dim(1)));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& p = layers_[l];
    x = ad::add(x, multi_attn(ad::layer_norm(x, p.ln1_gain, p.ln1_bias), l, adapted));
    ad::Tensor ff = ad::gelu(ad::linear(ad::layer_norm(x, p.ln2_gain, p.ln2_bias), p.ffn_w1, p.ffn_b1));
    x = ad::add(x, ad::linear(ff, p.ffn_w2, p.ffn_b2));
  }
  return ad::layer_norm(x, lnf_gain_, lnf_bias_);
}

ad::Tensor Decoder::logits(const ad::Tensor& hidden) const { return ad::linear(hidden, head_w_, head_b_); }

}  // namespace vprompt::fusion
