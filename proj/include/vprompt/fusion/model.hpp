// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vprompt/autodiff/params.hpp"
#include "vprompt/fusion/decoder.hpp"
#include "vprompt/fusion/tokenizer.hpp"
#include "vprompt/prompt/prompt.hpp"
#include "vprompt/vision/image.hpp"
#include "vprompt/vision/mov.hpp"

namespace vprompt::fusion {

struct ModelConfig {
  vision::EncoderConfig encoder;
  DecoderConfig decoder;
  /// Images and prompt rasters are resampled to image_size x image_size.
  int image_size = 32;
  /// Point-prompt disk radius in source pixels; 0 picks the default per image.
  int point_radius = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::ordered_json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Positions: <img>, n image rows, <vp>, n prompt rows, <sep>, instruction,
/// <sep>, answer, <eos>. Visual rows hold token -1.
struct TokenSequence {
  std::vector<int> tokens;
  std::vector<bool> loss_mask;  // true on answer and <eos> positions
  std::size_t visual_tokens = 0;
  std::size_t answer_begin = 0;  // first position after the second <sep>
  bool prefix = false;           // partial answer without <eos>, nothing masked

  std::size_t size() const { return tokens.size(); }
  std::size_t image_begin() const { return 1; }
  std::size_t prompt_begin() const { return visual_tokens + 2; }
  std::size_t text_begin() const { return 2 * visual_tokens + 2; }

  /// Checks block order and that the mask covers exactly the answer and <eos>.
  void validate() const;
};

/// With `as_prefix` the answer is a partial generation: no <eos> is appended
/// and the mask is all false.
TokenSequence assemble_sequence(std::size_t visual_tokens, std::span<const int> instruction,
                                std::span<const int> answer, bool as_prefix = false);

struct VisualFeatures {
  ad::Tensor image;   // (g*g, D_total)
  ad::Tensor prompt;  // (g*g, D_total)
  prompt::Level level = prompt::Level::Image;
};

struct LossResult {
  ad::Tensor loss;
  std::size_t correct = 0;  // teacher-forced argmax hits on masked positions
  std::size_t total = 0;
};

struct GenerateResult {
  std::string text;
  std::vector<int> ids;  // excludes <eos>
  std::vector<double> logprobs;
  bool stopped_on_eos = false;
  bool truncated = false;
  prompt::Level level = prompt::Level::Image;
};

class Model {
 public:
  Model(ModelConfig config, Vocab vocab);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  ad::ParameterStore& params() { return store_; }
  const ad::ParameterStore& params() const { return store_; }
  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const vision::MovEncoder& encoder() const { return *encoder_; }
  const Decoder& decoder() const { return *decoder_; }

  /// Resamples the image, rasterizes the prompts at the source resolution,
  /// resamples the raster and encodes both with the shared encoder.
  VisualFeatures encode_visual(const vision::Image& image, std::span<const prompt::PromptSpec> prompts,
                               std::set<ad::ParamId>* used_image = nullptr,
                               std::set<ad::ParamId>* used_prompt = nullptr) const;

  /// Logits for every position: (T, |V|).
  ad::Tensor sequence_logits(const VisualFeatures& visual, const TokenSequence& seq, bool adapted = true) const;
  /// Mean next-token cross-entropy over masked positions.
  LossResult forward_loss(const VisualFeatures& visual, const TokenSequence& seq) const;

  /// Greedy decoding. <bos>, <sep>, <img> and <vp> are never emitted; each
  /// logprob is taken under the full softmax.
  GenerateResult generate(const VisualFeatures& visual, std::span<const int> instruction, int max_len) const;
  GenerateResult generate(const vision::Image& image, std::span<const prompt::PromptSpec> prompts,
                          const std::string& instruction, int max_len) const;

 private:
  ad::Tensor sequence_rows(const VisualFeatures& visual, const TokenSequence& seq) const;

  ModelConfig config_;
  Vocab vocab_;
  ad::ParameterStore store_;
  std::unique_ptr<vision::MovEncoder> encoder_;
  std::unique_ptr<Decoder> decoder_;
};

/// Writes model.json (config and vocab).
void save_model_spec(const Model& model, const std::filesystem::path& path);
/// Rebuilds a freshly initialized model from model.json.
std::unique_ptr<Model> load_model_spec(const std::filesystem::path& path);

}  // namespace vprompt::fusion
