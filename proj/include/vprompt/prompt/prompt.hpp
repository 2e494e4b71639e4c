// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vprompt::prompt {

enum class PromptKind { ImageLevel, Box, Point };

/// Interpretation granularity of a record. Exactly one of the three task
/// selectors is on for any record.
enum class Level { Image, Region, Point };

/// One visual prompt. Boxes (and the image-level box) use the half-open pixel
/// rectangle [x1, x2) x [y1, y2); points use (x, y) and ignore the rest.
struct PromptSpec {
  PromptKind kind = PromptKind::Box;
  std::array<int, 4> coords{};
  int mark = 1;

  static PromptSpec image_level(int width, int height, int mark = 1);
  static PromptSpec box(int x1, int y1, int x2, int y2, int mark);
  static PromptSpec point(int x, int y, int mark);

  int x() const { return coords[0]; }
  int y() const { return coords[1]; }

  bool operator==(const PromptSpec&) const = default;
};

/// H x W x 3 raster, row-major with interleaved channels, values in [0, 1].
struct PromptImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double at(int x, int y, int channel = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + channel];
  }
};

const char* kind_name(PromptKind kind);
PromptKind parse_kind(const std::string& name);
const char* level_name(Level level);
Level parse_level(const std::string& name);

/// Throws ValidationError on an out-of-bounds prompt, a malformed image-level
/// box, duplicate marks, marks outside 1..K, or mixed kinds.
void validate_prompts(std::span<const PromptSpec> prompts, int width, int height);

/// max(1, round(0.01 * min(width, height))).
int default_point_radius(int width, int height);

/// Encodes every prompt of a record into one image: pixels covered by the
/// prompt with mark i get intensity i / K in all three channels (K = number of
/// prompts); overlaps keep the larger mark; everything else is 0. Points cover
/// the closed disk of radius `point_radius` around the point.
PromptImage rasterize(std::span<const PromptSpec> prompts, int width, int height,
                      std::optional<int> point_radius = std::nullopt);

/// Level of a non-empty homogeneous prompt list.
Level level_of(std::span<const PromptSpec> prompts);

/// (lambda_image, lambda_region, lambda_point) with exactly one set.
std::array<int, 3> task_selector(Level level);

/// Debug dump of the first channel as an 8-bit binary PGM.
void write_pgm(const PromptImage& image, const std::filesystem::path& path);

}  // namespace vprompt::prompt
