// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <json.hpp>
#include <utility>
#include <vector>

#include "vprompt/data/convert.hpp"

namespace vprompt::data {

/// Fills pixels whose centers lie inside the polygon (even-odd rule) into
/// `mask`. `xy` alternates x and y coordinates.
void rasterize_polygon(const std::vector<double>& xy, Mask& mask);

/// Parses a COCO-style document. Images without usable annotations are
/// skipped. Image paths are resolved against `base_dir` unless absolute.
///
/// Per kind:
///   detection       annotations[].bbox [x, y, w, h] (rounded to the nearest integer)
///   instance_seg    annotations[].segmentation, polygons or uncompressed RLE
///   semantic_seg    images[].label_map (PNG/PGM path), categories give names,
///                   optional top-level "ignore_label"
///   classification  annotations[].category_id, one category per image
///   caption         annotations[].caption
///
/// Schema problems throw ValidationError prefixed with a JSON path, e.g.
/// "$.annotations[3].bbox: expected 4 numbers".
std::vector<AnnotationSource> parse_coco_style(const nlohmann::json& doc, SourceKind kind,
                                               const std::filesystem::path& base_dir);

/// Reads and parses a file; IoError when it cannot be opened.
std::vector<AnnotationSource> ingest_coco_style(const std::filesystem::path& path, SourceKind kind);

}  // namespace vprompt::data
