// SPDX-License-Identifier: Apache-2.0
#include "vprompt/prompt/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "vprompt/core/errors.hpp"

namespace vprompt::prompt {

PromptSpec PromptSpec::image_level(int width, int height, int mark) {
  return {PromptKind::ImageLevel, {0, 0, width, height}, mark};
}

PromptSpec PromptSpec::box(int x1, int y1, int x2, int y2, int mark) {
  return {PromptKind::Box, {x1, y1, x2, y2}, mark};
}

PromptSpec PromptSpec::point(int x, int y, int mark) { return {PromptKind::Point, {x, y, 0, 0}, mark}; }

const char* kind_name(PromptKind kind) {
  switch (kind) {
    case PromptKind::ImageLevel:
      return "image";
    case PromptKind::Box:
      return "box";
    case PromptKind::Point:
      return "point";
  }
  return "?";
}

PromptKind parse_kind(const std::string& name) {
  if (name == "image") return PromptKind::ImageLevel;
  if (name == "box") return PromptKind::Box;
  if (name == "point") return PromptKind::Point;
  throw ValidationError("unknown prompt kind '" + name + "'");
}

const char* level_name(Level level) {
  switch (level) {
    case Level::Image:
      return "image";
    case Level::Region:
      return "region";
    case Level::Point:
      return "point";
  }
  return "?";
}

Level parse_level(const std::string& name) {
  if (name == "image") return Level::Image;
  if (name == "region") return Level::Region;
  if (name == "point") return Level::Point;
  throw ValidationError("unknown level '" + name + "'");
}

void validate_prompts(std::span<const PromptSpec> prompts, int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("prompts: image size must be positive");
  std::set<int> marks;
  const int k = static_cast<int>(prompts.size());
  for (const auto& p : prompts) {
    if (p.kind != prompts.front().kind) throw ValidationError("prompts: mixed prompt kinds in one record");
    const auto& c = p.coords;
    switch (p.kind) {
      case PromptKind::ImageLevel:
        if (c != std::array<int, 4>{0, 0, width, height}) {
          throw ValidationError("prompts: image-level prompt must be (0,0," + std::to_string(width) + "," +
                                std::to_string(height) + ")");
        }
        break;
      case PromptKind::Box:
        if (!(0 <= c[0] && c[0] < c[2] && c[2] <= width && 0 <= c[1] && c[1] < c[3] && c[3] <= height)) {
          throw ValidationError("prompts: box (" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," +
                                std::to_string(c[2]) + "," + std::to_string(c[3]) + ") out of bounds");
        }
        break;
      case PromptKind::Point:
        if (!(0 <= c[0] && c[0] < width && 0 <= c[1] && c[1] < height)) {
          throw ValidationError("prompts: point (" + std::to_string(c[0]) + "," + std::to_string(c[1]) +
                                ") out of bounds");
        }
        break;
    }
    if (!marks.insert(p.mark).second) throw ValidationError("prompts: duplicate mark " + std::to_string(p.mark));
    if (p.mark < 1 || p.mark > k) {
      throw ValidationError("prompts: mark " + std::to_string(p.mark) + " outside 1.." + std::to_string(k));
    }
  }
}

int default_point_radius(int width, int height) {
  return std::max(1, static_cast<int>(std::lround(0.01 * std::min(width, height))));
}

PromptImage rasterize(std::span<const PromptSpec> prompts, int width, int height, std::optional<int> point_radius) {
  validate_prompts(prompts, width, height);
  const int radius = point_radius.value_or(default_point_radius(width, height));
  if (radius < 0) throw ValidationError("rasterize: negative point radius");
  PromptImage img{width, height, std::vector<double>(static_cast<std::size_t>(width) * height * 3, 0.0)};
  const double k = static_cast<double>(prompts.size());
  auto paint = [&](int x, int y, double value) {
    double* px = img.data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    // Intensity grows with the mark, so max() resolves overlaps toward the larger mark.
    if (value > px[0]) px[0] = px[1] = px[2] = value;
  };
  for (const auto& p : prompts) {
    const double value = p.mark / k;
    if (p.kind == PromptKind::Point) {
      const int r2 = radius * radius;
      for (int y = std::max(0, p.y() - radius); y <= std::min(height - 1, p.y() + radius); ++y) {
        for (int x = std::max(0, p.x() - radius); x <= std::min(width - 1, p.x() + radius); ++x) {
          const int dx = x - p.x(), dy = y - p.y();
          if (dx * dx + dy * dy <= r2) paint(x, y, value);
        }
      }
    } else {
      for (int y = p.coords[1]; y < p.coords[3]; ++y) {
        for (int x = p.coords[0]; x < p.coords[2]; ++x) paint(x, y, value);
      }
    }
  }
  return img;
}

Level level_of(std::span<const PromptSpec> prompts) {
  if (prompts.empty()) throw ValidationError("level_of: empty prompt list");
  for (const auto& p : prompts) {
    if (p.kind != prompts.front().kind) throw ValidationError("level_of: mixed prompt kinds in one record");
  }
  switch (prompts.front().kind) {
    case PromptKind::ImageLevel:
      return Level::Image;
    case PromptKind::Box:
      return Level::Region;
    case PromptKind::Point:
      return Level::Point;
  }
  return Level::Image;
}

std::array<int, 3> task_selector(Level level) {
  return {level == Level::Image ? 1 : 0, level == Level::Region ? 1 : 0, level == Level::Point ? 1 : 0};
}

void write_pgm(const PromptImage& image, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * image.at(x, y)))));
    }
  }
}

}  // namespace vprompt::prompt
