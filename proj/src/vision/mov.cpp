// SPDX-License-Identifier: Apache-2.0
#include "vprompt/vision/mov.hpp"

#include <cmath>

#include "vprompt/autodiff/nn.hpp"
#include "vprompt/autodiff/ops.hpp"
#include "vprompt/core/errors.hpp"
#include "vprompt/vision/image.hpp"

namespace vprompt::vision {

namespace {
constexpr std::size_t kKernel = 3;
constexpr std::size_t kPad = 1;

std::size_t conv_out(std::size_t n, std::size_t stride) { return (n + 2 * kPad - kKernel) / stride + 1; }
}  // namespace

void EncoderConfig::validate() const {
  if (token_grid < 1) throw ValidationError("encoder: token_grid must be >= 1");
  if (embed_dim < 1) throw ValidationError("encoder: embed_dim must be >= 1");
  if (patch_size < 1) throw ValidationError("encoder: patch_size must be >= 1");
  if (scales.empty()) throw ValidationError("encoder: at least one scale is required");
  for (int s : scales) {
    if (s < 1) throw ValidationError("encoder: scale factors must be >= 1");
  }
  for (int c : conv_channels) {
    if (c < 1) throw ValidationError("encoder: conv channel counts must be >= 1");
  }
  if (conv_strides.size() != conv_channels.size() + 1) {
    throw ValidationError("encoder: need one stride per conv stage (" + std::to_string(conv_channels.size() + 1) +
                          "), got " + std::to_string(conv_strides.size()));
  }
  for (int s : conv_strides) {
    if (s < 1) throw ValidationError("encoder: conv strides must be >= 1");
  }
}

std::size_t EncoderConfig::feature_width() const { return 2 * static_cast<std::size_t>(embed_dim) * scales.size(); }

MovEncoder::Param MovEncoder::make(ad::ParameterStore& store, const std::string& name, ad::Shape shape, double stddev,
                                   std::mt19937_64& rng) {
  const std::size_t n = ad::numel(shape);
  auto values = stddev > 0 ? ad::normal_values(n, stddev, rng) : std::vector<double>(n, 0.0);
  ad::Tensor t = store.create(name, shape, std::move(values));
  return Param{store.find(name)->id, t};
}

MovEncoder::MovEncoder(ad::ParameterStore& store, EncoderConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::size_t in = 3;
  std::vector<int> widths = config_.conv_channels;
  widths.push_back(config_.embed_dim);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::size_t out = static_cast<std::size_t>(widths[i]);
    const std::size_t fan_in = kKernel * kKernel * in;
    const std::string base = "mov.conv.stage" + std::to_string(i);
    ConvStage stage;
    stage.weight = make(store, base + ".weight", {out, fan_in}, std::sqrt(2.0 / fan_in), rng);
    stage.bias = make(store, base + ".bias", {out}, 0.0, rng);
    stage.stride = config_.conv_strides[i];
    conv_.push_back(stage);
    in = out;
  }
  const std::size_t e = static_cast<std::size_t>(config_.embed_dim);
  const std::size_t patch_in = static_cast<std::size_t>(config_.patch_size * config_.patch_size) * 3;
  patch_w_ = make(store, "mov.patch.embed.weight", {e, patch_in}, 1.0 / std::sqrt(patch_in), rng);
  patch_b_ = make(store, "mov.patch.embed.bias", {e}, 0.0, rng);
  ad::Tensor gain = store.create("mov.patch.ln.gain", {e}, std::vector<double>(e, 1.0));
  ln_gain_ = Param{store.find("mov.patch.ln.gain")->id, gain};
  ln_bias_ = make(store, "mov.patch.ln.bias", {e}, 0.0, rng);
  const double sd = 1.0 / std::sqrt(static_cast<double>(e));
  wq_ = make(store, "mov.patch.attn.wq", {e, e}, sd, rng);
  wk_ = make(store, "mov.patch.attn.wk", {e, e}, sd, rng);
  wv_ = make(store, "mov.patch.attn.wv", {e, e}, sd, rng);
  wo_ = make(store, "mov.patch.attn.wo", {e, e}, sd, rng);
}

std::set<ad::ParamId> MovEncoder::param_ids() const {
  std::set<ad::ParamId> ids;
  for (const auto& s : conv_) ids.insert({s.weight.id, s.bias.id});
  for (const Param* p : {&patch_w_, &patch_b_, &ln_gain_, &ln_bias_, &wq_, &wk_, &wv_, &wo_}) ids.insert(p->id);
  return ids;
}

void MovEncoder::check_input(std::size_t height, std::size_t width) const {
  const auto g = static_cast<std::size_t>(config_.token_grid);
  const auto patch = static_cast<std::size_t>(config_.patch_size);
  if (height != width) {
    throw ShapeError("encode: input must be square, got " + std::to_string(height) + "x" + std::to_string(width));
  }
  for (int scale : config_.scales) {
    const auto s = static_cast<std::size_t>(scale);
    const std::string where =
        "encode: input " + std::to_string(height) + "x" + std::to_string(width) + " at scale " + std::to_string(scale);
    if (height % s != 0 || width % s != 0) throw ShapeError(where + ": scale does not divide the image");
    std::size_t h = height / s, w = width / s;
    const std::size_t ph = h, pw = w;
    for (const auto& stage : conv_) {
      if (h + 2 * kPad < kKernel || w + 2 * kPad < kKernel) throw ShapeError(where + ": image too small for conv");
      h = conv_out(h, static_cast<std::size_t>(stage.stride));
      w = conv_out(w, static_cast<std::size_t>(stage.stride));
    }
    if (h % g != 0 || w % g != 0) {
      throw ShapeError(where + ": conv grid " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by " +
                       std::to_string(g));
    }
    if (ph % patch != 0 || pw % patch != 0) throw ShapeError(where + ": patch size does not divide the image");
    if ((ph / patch) % g != 0 || (pw / patch) % g != 0) {
      throw ShapeError(where + ": patch grid not divisible by " + std::to_string(g));
    }
  }
}

namespace {
const ad::Tensor& use(const ad::Tensor& t, ad::ParamId id, std::set<ad::ParamId>* used) {
  if (used) used->insert(id);
  return t;
}
}  // namespace

ad::Tensor MovEncoder::conv_branch(const ad::Tensor& x, std::set<ad::ParamId>* used) const {
  ad::Tensor h = x;
  std::size_t rows = x.dim(0), cols = x.dim(1);
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    const auto& stage = conv_[i];
    const auto stride = static_cast<std::size_t>(stage.stride);
    ad::Tensor cols_t = ad::im2col(h, kKernel, stride, kPad);
    rows = conv_out(rows, stride);
    cols = conv_out(cols, stride);
    ad::Tensor y =
        ad::linear(cols_t, use(stage.weight.value, stage.weight.id, used), use(stage.bias.value, stage.bias.id, used));
    if (i + 1 < conv_.size()) y = ad::gelu(y);
    h = ad::reshape(y, {rows, cols, stage.weight.value.dim(0)});
  }
  const auto g = static_cast<std::size_t>(config_.token_grid);
  h = ad::avg_pool2d(h, rows / g);
  return ad::reshape(h, {g * g, static_cast<std::size_t>(config_.embed_dim)});
}

ad::Tensor MovEncoder::patch_branch(const ad::Tensor& x, std::set<ad::ParamId>* used) const {
  const auto p = static_cast<std::size_t>(config_.patch_size);
  const auto e = static_cast<std::size_t>(config_.embed_dim);
  const std::size_t gh = x.dim(0) / p, gw = x.dim(1) / p;
  // Non-overlapping patches: a stride-p, pad-0 window gives (gh*gw, p*p*3).
  ad::Tensor patches = ad::im2col(x, p, p, 0);
  ad::Tensor tokens =
      ad::linear(patches, use(patch_w_.value, patch_w_.id, used), use(patch_b_.value, patch_b_.id, used));
  tokens = ad::add(tokens, ad::sinusoidal_positions(gh * gw, e));
  ad::Tensor n = ad::layer_norm(tokens, use(ln_gain_.value, ln_gain_.id, used), use(ln_bias_.value, ln_bias_.id, used));
  ad::Tensor q = ad::linear(n, use(wq_.value, wq_.id, used));
  ad::Tensor k = ad::linear(n, use(wk_.value, wk_.id, used));
  ad::Tensor v = ad::linear(n, use(wv_.value, wv_.id, used));
  ad::Tensor a = ad::linear(ad::attention(q, k, v, e, false), use(wo_.value, wo_.id, used));
  tokens = ad::add(tokens, a);
  const auto g = static_cast<std::size_t>(config_.token_grid);
  ad::Tensor grid = ad::avg_pool2d(ad::reshape(tokens, {gh, gw, e}), gh / g);
  return ad::reshape(grid, {g * g, e});
}

MoVFeatures MovEncoder::encode(const ad::Tensor& input, FeatureSource source, std::set<ad::ParamId>* used) const {
  if (input.rank() != 3 || input.dim(2) != 3) {
    throw ShapeError("encode: expected (H,W,3) input, got " + ad::shape_str(input.shape()));
  }
  check_input(input.dim(0), input.dim(1));
  std::vector<ad::Tensor> blocks;
  for (int scale : config_.scales) {
    ad::Tensor scaled = downsample(input, scale);
    blocks.push_back(conv_branch(scaled, used));
    blocks.push_back(patch_branch(scaled, used));
  }
  MoVFeatures out{ad::concat(blocks, 1), source};
  for (double v : out.tokens.data()) {
    if (!std::isfinite(v)) throw NumericError("encode: non-finite feature value");
  }
  return out;
}

}  // namespace vprompt::vision
