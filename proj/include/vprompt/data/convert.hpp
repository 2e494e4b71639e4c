// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vprompt/data/record.hpp"
#include "vprompt/vision/image.hpp"

namespace vprompt::data {

enum class SourceKind { Detection, InstanceSeg, SemanticSeg, Classification, Caption };

const char* source_kind_name(SourceKind kind);
SourceKind parse_source_kind(const std::string& name);

/// Binary mask, row-major.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}
  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;
};

struct BoxAnnotation {
  std::array<int, 4> box{};  // x1, y1, x2, y2 (half-open)
  std::string label;
};

struct MaskAnnotation {
  Mask mask;
  std::string label;
};

struct AnnotationSource {
  SourceKind kind = SourceKind::Detection;
  std::string image;  // path as it should appear in records
  int width = 0;
  int height = 0;
  std::uint64_t image_id = 0;

  std::vector<BoxAnnotation> boxes;        // detection
  std::vector<MaskAnnotation> masks;       // instance_seg
  vision::LabelMap label_map;              // semantic_seg
  std::map<int, std::string> label_names;  // semantic_seg; empty means "use the number"
  int ignore_label = 255;                  // semantic_seg
  std::string label;                       // classification
  std::vector<std::string> captions;       // caption

  /// Boxes in bounds, mask/map sizes equal to the image, non-empty payload.
  void validate() const;
};

/// One record per caption, or a single classification record.
std::vector<InstructionRecord> from_classification_or_caption(const AnnotationSource& src);

/// One record with box prompts in source order. `task` is either
/// ReferringClassificationBox (labels) or RegionCaption (labels are captions).
std::vector<InstructionRecord> from_detection(const AnnotationSource& src,
                                              Task task = Task::ReferringClassificationBox);

/// One point record with a representative point per instance.
std::vector<InstructionRecord> from_instance_seg(const AnnotationSource& src);

/// Tiles the map into grid x grid patches (fewer when the map is smaller),
/// samples points per patch, drops ignored labels, and splits the points into
/// records of at most 32 marks.
std::vector<InstructionRecord> from_semantic_seg(const AnnotationSource& src, int grid, int samples_per_patch,
                                                 std::uint64_t seed);

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

/// Exact squared Euclidean distance from every mask pixel to the nearest
/// background pixel (pixels outside the image count as background); 0 on
/// background pixels.
std::vector<long long> squared_distance_to_background(const Mask& mask);

/// Mask pixel maximizing distance to the background; ties go to the smallest
/// (y, x). Throws ValidationError for an empty mask.
Point representative_point(const Mask& mask);

struct SampledPoint {
  Point point;
  int label = 0;
};

/// Patch bounds follow floor(i * size / grid).
std::vector<SampledPoint> sample_semantic_points(const vision::LabelMap& map, int grid, int samples_per_patch,
                                                 std::uint64_t seed, int ignore_label);

/// splitmix64 finalizer, used to derive per-source seeds from a root seed.
std::uint64_t splitmix64(std::uint64_t x);

/// Dispatches on the source kind.
std::vector<InstructionRecord> convert(const AnnotationSource& src, int grid, int samples_per_patch,
                                       std::uint64_t root_seed);

}  // namespace vprompt::data
