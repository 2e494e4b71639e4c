// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vprompt/autodiff/tensor.hpp"
#include "vprompt/prompt/prompt.hpp"

namespace vprompt::vision {

/// H x W x 3 RGB image, row-major with interleaved channels, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0);

  double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

/// Per-pixel integer labels (semantic segmentation maps).
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Reads binary/ASCII PPM (P6/P3), PGM (P5/P2, replicated to RGB) or PNG.
Image load_image(const std::filesystem::path& path);
void save_ppm(const Image& image, const std::filesystem::path& path);

/// Reads an indexed map from PGM (8 or 16 bit) or PNG (grey or palette index).
LabelMap load_label_map(const std::filesystem::path& path);
void save_pgm(const LabelMap& map, const std::filesystem::path& path);

Image to_image(const prompt::PromptImage& prompt_image);
ad::Tensor to_tensor(const Image& image);

/// Average pooling with window = stride = factor on an (H, W, 3) tensor;
/// factor 1 returns the input unchanged. Throws ValidationError for factor <= 0.
ad::Tensor downsample(const ad::Tensor& image, int factor);

/// Bilinear resampling with pixel-center alignment.
Image resize_bilinear(const Image& image, int width, int height);

/// Smooth random test image: a few overlapping colored gradients.
Image synthetic_image(int width, int height, std::uint64_t seed);

}  // namespace vprompt::vision
