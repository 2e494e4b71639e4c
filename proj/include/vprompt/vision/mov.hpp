// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "vprompt/autodiff/params.hpp"
#include "vprompt/autodiff/tensor.hpp"

namespace vprompt::vision {

struct EncoderConfig {
  /// Hidden conv stages; a final stage maps to embed_dim.
  std::vector<int> conv_channels{8, 12};
  /// One stride per conv stage including the final one.
  std::vector<int> conv_strides{1, 2, 1};
  int patch_size = 2;
  int embed_dim = 16;
  int token_grid = 8;
  std::vector<int> scales{1, 2};

  /// Throws ValidationError on non-positive sizes or stride/stage count mismatch.
  void validate() const;
  /// 2 encoders x embed_dim x |scales|.
  std::size_t feature_width() const;
};

enum class FeatureSource { Image, Prompt };

struct MoVFeatures {
  ad::Tensor tokens;  // (g*g, D_total)
  FeatureSource source = FeatureSource::Image;
};

/// Conv encoder and patch-attention encoder, each applied at every scale.
/// Blocks are concatenated scale-major, encoder-minor (conv before patch).
class MovEncoder {
 public:
  MovEncoder(ad::ParameterStore& store, EncoderConfig config, std::uint64_t seed);

  /// `input` is (H, W, 3). If `used` is given, every parameter read is recorded.
  MoVFeatures encode(const ad::Tensor& input, FeatureSource source, std::set<ad::ParamId>* used = nullptr) const;

  const EncoderConfig& config() const { return config_; }
  std::set<ad::ParamId> param_ids() const;

  /// Throws ShapeError unless the input is square and every scale, stride and
  /// patch size lands on a grid divisible by token_grid.
  void check_input(std::size_t height, std::size_t width) const;

 private:
  struct Param {
    ad::ParamId id;
    ad::Tensor value;
  };
  struct ConvStage {
    Param weight, bias;
    int stride;
  };

  static Param make(ad::ParameterStore& store, const std::string& name, ad::Shape shape, double stddev,
                    std::mt19937_64& rng);
  ad::Tensor conv_branch(const ad::Tensor& x, std::set<ad::ParamId>* used) const;
  ad::Tensor patch_branch(const ad::Tensor& x, std::set<ad::ParamId>* used) const;

  EncoderConfig config_;
  std::vector<ConvStage> conv_;
  Param patch_w_, patch_b_;
  Param ln_gain_, ln_bias_;
  Param wq_, wk_, wv_, wo_;
};

}  // namespace vprompt::vision
