// SPDX-License-Identifier: Apache-2.0
#include "vprompt/fusion/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "vprompt/autodiff/ops.hpp"
#include "vprompt/core/errors.hpp"

namespace vprompt::fusion {

using nlohmann::json;
using nlohmann::ordered_json;

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (image_size < 1) throw ValidationError("model: image_size must be >= 1");
  if (point_radius < 0) throw ValidationError("model: point_radius must be >= 0");
}

namespace {

template <typename T>
T read_key(const json& j, const std::string& key, const T& fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(path + "." + key + ": " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw ValidationError(path + "." + item.key() + ": unknown key");
  }
}

}  // namespace

ordered_json to_json(const ModelConfig& c) {
  ordered_json j;
  j["encoder"] = {{"conv_channels", c.encoder.conv_channels}, {"conv_strides", c.encoder.conv_strides},
                  {"patch_size", c.encoder.patch_size},       {"embed_dim", c.encoder.embed_dim},
                  {"token_grid", c.encoder.token_grid},       {"scales", c.encoder.scales}};
  j["decoder"] = {{"width", c.decoder.width},
                  {"layers", c.decoder.layers},
                  {"heads", c.decoder.heads},
                  {"ffn_hidden", c.decoder.ffn_hidden},
                  {"lora_rank", c.decoder.lora_rank}};
  j["image_size"] = c.image_size;
  j["point_radius"] = c.point_radius;
  j["seed"] = c.seed;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  reject_unknown(j, {"encoder", "decoder", "image_size", "point_radius", "seed"}, "model");
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    reject_unknown(e, {"conv_channels", "conv_strides", "patch_size", "embed_dim", "token_grid", "scales"},
                   "model.encoder");
    c.encoder.conv_channels = read_key(e, "conv_channels", c.encoder.conv_channels, "model.encoder");
    c.encoder.conv_strides = read_key(e, "conv_strides", c.encoder.conv_strides, "model.encoder");
    c.encoder.patch_size = read_key(e, "patch_size", c.encoder.patch_size, "model.encoder");
    c.encoder.embed_dim = read_key(e, "embed_dim", c.encoder.embed_dim, "model.encoder");
    c.encoder.token_grid = read_key(e, "token_grid", c.encoder.token_grid, "model.encoder");
    c.encoder.scales = read_key(e, "scales", c.encoder.scales, "model.encoder");
  }
  if (j.contains("decoder")) {
    const json& d = j["decoder"];
    reject_unknown(d, {"width", "layers", "heads", "ffn_hidden", "lora_rank"}, "model.decoder");
    c.decoder.width = read_key(d, "width", c.decoder.width, "model.decoder");
    c.decoder.layers = read_key(d, "layers", c.decoder.layers, "model.decoder");
    c.decoder.heads = read_key(d, "heads", c.decoder.heads, "model.decoder");
    c.decoder.ffn_hidden = read_key(d, "ffn_hidden", c.decoder.ffn_hidden, "model.decoder");
    c.decoder.lora_rank = read_key(d, "lora_rank", c.decoder.lora_rank, "model.decoder");
  }
  c.image_size = read_key(j, "image_size", c.image_size, "model");
  c.point_radius = read_key(j, "point_radius", c.point_radius, "model");
  c.seed = read_key(j, "seed", c.seed, "model");
  c.validate();
  return c;
}

void TokenSequence::validate() const {
  const std::size_t n = visual_tokens;
  if (loss_mask.size() != tokens.size()) throw ValidationError("sequence: mask length differs from token count");
  if (n == 0 || tokens.size() < 2 * n + 4) throw ValidationError("sequence: too short for two visual blocks");
  if (tokens[0] != Vocab::kImg || tokens[n + 1] != Vocab::kVp) {
    throw ValidationError("sequence: <img> and <vp> must open the two visual blocks");
  }
  std::size_t img = 0, vp = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    img += tokens[i] == Vocab::kImg;
    vp += tokens[i] == Vocab::kVp;
    const bool in_visual =
        (i >= image_begin() && i < image_begin() + n) || (i >= prompt_begin() && i < prompt_begin() + n);
    if (in_visual != (tokens[i] == -1))
      throw ValidationError("sequence: visual rows misplaced at " + std::to_string(i));
  }
  if (img != 1 || vp != 1) throw ValidationError("sequence: expected exactly one <img> and one <vp>");
  if (tokens[text_begin()] != Vocab::kSep) throw ValidationError("sequence: missing <sep> after visual blocks");
  if (answer_begin < text_begin() + 2 || answer_begin > tokens.size() || tokens[answer_begin - 1] != Vocab::kSep) {
    throw ValidationError("sequence: missing <sep> before the answer");
  }
  if (!prefix && (answer_begin >= tokens.size() || tokens.back() != Vocab::kEos)) {
    throw ValidationError("sequence: answer must end with <eos>");
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (loss_mask[i] != (!prefix && i >= answer_begin)) {
      throw ValidationError("sequence: loss mask must cover exactly the answer and <eos>");
    }
  }
}

TokenSequence assemble_sequence(std::size_t visual_tokens, std::span<const int> instruction,
                                std::span<const int> answer, bool as_prefix) {
  if (visual_tokens == 0) throw ValidationError("sequence: visual token count must be >= 1");
  TokenSequence seq;
  seq.visual_tokens = visual_tokens;
  seq.tokens.push_back(Vocab::kImg);
  seq.tokens.insert(seq.tokens.end(), visual_tokens, -1);
  seq.tokens.push_back(Vocab::kVp);
  seq.tokens.insert(seq.tokens.end(), visual_tokens, -1);
  seq.tokens.push_back(Vocab::kSep);
  seq.tokens.insert(seq.tokens.end(), instruction.begin(), instruction.end());
  seq.tokens.push_back(Vocab::kSep);
  seq.answer_begin = seq.tokens.size();
  seq.prefix = as_prefix;
  seq.tokens.insert(seq.tokens.end(), answer.begin(), answer.end());
  if (!as_prefix) seq.tokens.push_back(Vocab::kEos);
  seq.loss_mask.assign(seq.tokens.size(), false);
  if (!as_prefix) {
    for (std::size_t i = seq.answer_begin; i < seq.tokens.size(); ++i) seq.loss_mask[i] = true;
  }
  for (int id : instruction) {
    if (id < 0) throw ValidationError("sequence: negative instruction token id");
  }
  for (int id : answer) {
    if (id < 0) throw ValidationError("sequence: negative answer token id");
  }
  return seq;
}

Model::Model(ModelConfig config, Vocab vocab) : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  encoder_ = std::make_unique<vision::MovEncoder>(store_, config_.encoder, config_.seed);
  encoder_->check_input(static_cast<std::size_t>(config_.image_size), static_cast<std::size_t>(config_.image_size));
  std::mt19937_64 rng(config_.seed ^ 0x9E3779B97F4A7C15ULL);
  decoder_ = std::make_unique<Decoder>(store_, config_.decoder, vocab_.size(), config_.encoder.feature_width(), rng);
}

VisualFeatures Model::encode_visual(const vision::Image& image, std::span<const prompt::PromptSpec> prompts,
                                    std::set<ad::ParamId>* used_image, std::set<ad::ParamId>* used_prompt) const {
  if (prompts.empty()) throw ValidationError("encode_visual: at least one prompt is required");
  const int radius =
      config_.point_radius > 0 ? config_.point_radius : prompt::default_point_radius(image.width, image.height);
  auto raster = prompt::rasterize(prompts, image.width, image.height, radius);
  const int s = config_.image_size;
  auto img = vision::resize_bilinear(image, s, s);
  auto prm = vision::resize_bilinear(vision::to_image(raster), s, s);
  VisualFeatures out;
  out.image = encoder_->encode(vision::to_tensor(img), vision::FeatureSource::Image, used_image).tokens;
  out.prompt = encoder_->encode(vision::to_tensor(prm), vision::FeatureSource::Prompt, used_prompt).tokens;
  out.level = prompt::level_of(prompts);
  return out;
}

ad::Tensor Model::sequence_rows(const VisualFeatures& visual, const TokenSequence& seq) const {
  seq.validate();
  const std::size_t n = seq.visual_tokens;
  if (visual.image.rank() != 2 || visual.image.dim(0) != n || visual.prompt.rank() != 2 || visual.prompt.dim(0) != n) {
    throw ShapeError("sequence: visual features " + ad::shape_str(visual.image.shape()) + "/" +
                     ad::shape_str(visual.prompt.shape()) + " do not match " + std::to_string(n) + " visual rows");
  }
  std::vector<int> text(seq.tokens.begin() + static_cast<std::ptrdiff_t>(seq.text_begin()), seq.tokens.end());
  const int img_id[1] = {Vocab::kImg};
  const int vp_id[1] = {Vocab::kVp};
  return ad::concat({decoder_->embed(img_id), decoder_->project(visual.image), decoder_->embed(vp_id),
                     decoder_->project(visual.prompt), decoder_->embed(text)},
                    0);
}

ad::Tensor Model::sequence_logits(const VisualFeatures& visual, const TokenSequence& seq, bool adapted) const {
  return decoder_->logits(decoder_->hidden(sequence_rows(visual, seq), adapted));
}

LossResult Model::forward_loss(const VisualFeatures& visual, const TokenSequence& seq) const {
  std::vector<int> rows, targets;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    if (seq.loss_mask[i]) {
      rows.push_back(static_cast<int>(i - 1));
      targets.push_back(seq.tokens[i]);
    }
  }
  if (rows.empty()) throw ValidationError("forward_loss: empty loss mask");
  ad::Tensor h = decoder_->hidden(sequence_rows(visual, seq));
  ad::Tensor logits = decoder_->logits(ad::embedding(h, rows));
  LossResult out;
  out.loss = ad::cross_entropy(logits, targets);
  if (!std::isfinite(out.loss.item())) throw NumericError("forward_loss: non-finite loss");
  const auto v = static_cast<std::size_t>(vocab_.size());
  const auto data = logits.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = data.subspan(r * v, v);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    out.correct += best == targets[r];
  }
  out.total = rows.size();
  return out;
}

GenerateResult Model::generate(const VisualFeatures& visual, std::span<const int> instruction, int max_len) const {
  if (max_len < 1) throw ValidationError("generate: max_len must be >= 1");
  TokenSequence seq = assemble_sequence(visual.image.dim(0), instruction, {}, true);
  GenerateResult out;
  out.level = visual.level;
  const auto v = static_cast<std::size_t>(vocab_.size());
  for (int step = 0; step < max_len; ++step) {
    ad::Tensor h = decoder_->hidden(sequence_rows(visual, seq));
    const int last[1] = {static_cast<int>(seq.size() - 1)};
    ad::Tensor logits = decoder_->logits(ad::embedding(h, last));
    const auto row = logits.data().subspan(0, v);
    // Structural tokens would break the sequence layout; they are never emitted.
    auto best = static_cast<std::size_t>(Vocab::kEos);
    for (std::size_t k = 0; k < v; ++k) {
      const int id = static_cast<int>(k);
      if (id == Vocab::kBos || id == Vocab::kSep || id == Vocab::kImg || id == Vocab::kVp) continue;
      if (row[k] > row[best]) best = k;
    }
    const double peak = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double x : row) denom += std::exp(x - peak);
    const double logprob = row[best] - peak - std::log(denom);
    if (static_cast<int>(best) == Vocab::kEos) {
      out.stopped_on_eos = true;
      break;
    }
    out.ids.push_back(static_cast<int>(best));
    out.logprobs.push_back(logprob);
    seq.tokens.push_back(static_cast<int>(best));
    seq.loss_mask.push_back(false);
  }
  out.truncated = !out.stopped_on_eos;
  out.text = detokenize(out.ids, vocab_);
  return out;
}

GenerateResult Model::generate(const vision::Image& image, std::span<const prompt::PromptSpec> prompts,
                               const std::string& instruction, int max_len) const {
  auto visual = encode_visual(image, prompts);
  auto ids = tokenize(instruction, vocab_);
  return generate(visual, ids, max_len);
}

void save_model_spec(const Model& model, const std::filesystem::path& path) {
  ordered_json j;
  j["format"] = "vprompt-model";
  j["config"] = to_json(model.config());
  j["vocab"] = model.vocab().tokens();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

std::unique_ptr<Model> load_model_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "vprompt-model" || !j.contains("config") || !j.contains("vocab")) {
    throw ValidationError(path.string() + ": not a model description");
  }
  auto config = model_config_from_json(j["config"]);
  std::vector<std::string> tokens;
  try {
    tokens = j["vocab"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": vocab: " + e.what());
  }
  return std::make_unique<Model>(config, Vocab(std::move(tokens)));
}

}  // namespace vprompt::fusion
