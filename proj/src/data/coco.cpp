// SPDX-License-Identifier: Apache-2.0
#include "vprompt/data/coco.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "vprompt/core/errors.hpp"

namespace vprompt::data {

using nlohmann::json;

void rasterize_polygon(const std::vector<double>& xy, Mask& mask) {
  if (xy.size() < 6 || xy.size() % 2 != 0) throw ValidationError("polygon needs at least 3 (x, y) pairs");
  const std::size_t n = xy.size() / 2;
  std::vector<double> crossings;
  for (int y = 0; y < mask.height; ++y) {
    const double yc = y + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const double xi = xy[2 * i], yi = xy[2 * i + 1], xj = xy[2 * j], yj = xy[2 * j + 1];
      if ((yi > yc) != (yj > yc)) crossings.push_back((xj - xi) * (yc - yi) / (yj - yi) + xi);
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    for (int x = 0; x < mask.width; ++x) {
      const double xc = x + 0.5;
      // Number of crossings strictly right of the center decides parity.
      const auto right = crossings.end() - std::upper_bound(crossings.begin(), crossings.end(), xc);
      if (right % 2 == 1) mask.set(x, y);
    }
  }
}

namespace {

using Path = std::string;

[[noreturn]] void fail(const Path& path, const std::string& what) { throw ValidationError(path + ": " + what); }

const json& member(const json& obj, const char* key, const Path& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path, std::string("missing field '") + key + "'");
  return *it;
}

long long integer(const json& j, const Path& path) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<long long>(v);
  }
  fail(path, std::string("expected an integer, got ") + j.type_name());
}

double number(const json& j, const Path& path) {
  if (!j.is_number()) fail(path, std::string("expected a number, got ") + j.type_name());
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "non-finite number");
  return v;
}

std::string string(const json& j, const Path& path) {
  if (!j.is_string()) fail(path, std::string("expected a string, got ") + j.type_name());
  return j.get<std::string>();
}

const json& array(const json& j, const Path& path) {
  if (!j.is_array()) fail(path, std::string("expected an array, got ") + j.type_name());
  return j;
}

struct ImageEntry {
  long long id;
  std::string file;
  int width;
  int height;
  Path path;
  const json* raw;
};

void decode_segmentation(const json& seg, Mask& mask, const Path& path) {
  if (seg.is_array()) {
    if (seg.empty()) fail(path, "empty polygon list");
    for (std::size_t p = 0; p < seg.size(); ++p) {
      const Path pp = path + "[" + std::to_string(p) + "]";
      const json& poly = array(seg[p], pp);
      std::vector<double> xy;
      for (std::size_t k = 0; k < poly.size(); ++k) xy.push_back(number(poly[k], pp + "[" + std::to_string(k) + "]"));
      if (xy.size() < 6 || xy.size() % 2 != 0) fail(pp, "polygon needs an even number (>= 6) of coordinates");
      Mask part(mask.width, mask.height);
      rasterize_polygon(xy, part);
      for (std::size_t i = 0; i < part.bits.size(); ++i) mask.bits[i] |= part.bits[i];
    }
    return;
  }
  if (seg.is_object()) {
    const json& counts = member(seg, "counts", path);
    if (counts.is_string()) fail(path + ".counts", "compressed RLE is not supported");
    array(counts, path + ".counts");
    const json& size = array(member(seg, "size", path), path + ".size");
    if (size.size() != 2 || integer(size[0], path + ".size[0]") != mask.height ||
        integer(size[1], path + ".size[1]") != mask.width) {
      fail(path + ".size", "expected [height, width] of the image");
    }
    // Column-major runs, starting with background.
    std::size_t pos = 0;
    const std::size_t total = mask.bits.size();
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const long long run = integer(counts[k], path + ".counts[" + std::to_string(k) + "]");
      if (run < 0 || pos + static_cast<std::size_t>(run) > total) {
        fail(path + ".counts[" + std::to_string(k) + "]", "run exceeds the image");
      }
      if (k % 2 == 1) {
        for (std::size_t i = pos; i < pos + static_cast<std::size_t>(run); ++i) {
          const int x = static_cast<int>(i / mask.height), y = static_cast<int>(i % mask.height);
          mask.set(x, y);
        }
      }
      pos += static_cast<std::size_t>(run);
    }
    if (pos != total) fail(path + ".counts", "runs do not cover the image");
    return;
  }
  fail(path, "expected a polygon list or an RLE object");
}

}  // namespace

std::vector<AnnotationSource> parse_coco_style(const json& doc, SourceKind kind,
                                               const std::filesystem::path& base_dir) {
  if (!doc.is_object()) fail("$", "expected an object");
  const json& images = array(member(doc, "images", "$"), "$.images");

  std::map<long long, std::string> categories;
  if (doc.contains("categories")) {
    const json& cats = array(doc.at("categories"), "$.categories");
    for (std::size_t i = 0; i < cats.size(); ++i) {
      const Path p = "$.categories[" + std::to_string(i) + "]";
      const long long id = integer(member(cats[i], "id", p), p + ".id");
      const std::string name = string(member(cats[i], "name", p), p + ".name");
      if (!categories.emplace(id, name).second) fail(p + ".id", "duplicate category id " + std::to_string(id));
    }
  }
  const bool needs_categories = kind != SourceKind::Caption && kind != SourceKind::SemanticSeg;
  if (needs_categories && categories.empty()) fail("$.categories", "missing or empty");

  std::vector<ImageEntry> entries;
  std::map<long long, std::size_t> by_id;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Path p = "$.images[" + std::to_string(i) + "]";
    ImageEntry e;
    e.id = integer(member(images[i], "id", p), p + ".id");
    if (e.id < 0) fail(p + ".id", "negative image id");
    e.file = string(member(images[i], "file_name", p), p + ".file_name");
    const long long w = integer(member(images[i], "width", p), p + ".width");
    const long long h = integer(member(images[i], "height", p), p + ".height");
    if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) fail(p, "image size out of range");
    e.width = static_cast<int>(w);
    e.height = static_cast<int>(h);
    e.path = p;
    e.raw = &images[i];
    if (!by_id.emplace(e.id, entries.size()).second) fail(p + ".id", "duplicate image id " + std::to_string(e.id));
    entries.push_back(e);
  }

  std::vector<AnnotationSource> sources(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& s = sources[i];
    s.kind = kind;
    const std::filesystem::path file(entries[i].file);
    s.image = (file.is_absolute() ? file : (base_dir / file)).lexically_normal().string();
    s.width = entries[i].width;
    s.height = entries[i].height;
    s.image_id = static_cast<std::uint64_t>(entries[i].id);
  }

  std::vector<std::set<long long>> classes(entries.size());
  if (doc.contains("annotations")) {
    const json& anns = array(doc.at("annotations"), "$.annotations");
    for (std::size_t a = 0; a < anns.size(); ++a) {
      const Path p = "$.annotations[" + std::to_string(a) + "]";
      const long long image_id = integer(member(anns[a], "image_id", p), p + ".image_id");
      auto it = by_id.find(image_id);
      if (it == by_id.end()) fail(p + ".image_id", "unknown image id " + std::to_string(image_id));
      auto& s = sources[it->second];
      auto label_of = [&]() {
        const long long cat = integer(member(anns[a], "category_id", p), p + ".category_id");
        auto c = categories.find(cat);
        if (c == categories.end()) fail(p + ".category_id", "unknown category id " + std::to_string(cat));
        return c->second;
      };
      switch (kind) {
        case SourceKind::Detection: {
          const json& bbox = array(member(anns[a], "bbox", p), p + ".bbox");
          if (bbox.size() != 4) fail(p + ".bbox", "expected 4 numbers");
          double v[4];
          for (int k = 0; k < 4; ++k) v[k] = number(bbox[k], p + ".bbox[" + std::to_string(k) + "]");
          if (v[2] <= 0 || v[3] <= 0) fail(p + ".bbox", "width and height must be positive");
          BoxAnnotation box;
          box.box = {static_cast<int>(std::lround(v[0])), static_cast<int>(std::lround(v[1])),
                     static_cast<int>(std::lround(v[0] + v[2])), static_cast<int>(std::lround(v[1] + v[3]))};
          const auto& b = box.box;
          if (b[0] < 0 || b[1] < 0 || b[2] > s.width || b[3] > s.height || b[0] >= b[2] || b[1] >= b[3]) {
            fail(p + ".bbox", "box outside image " + std::to_string(image_id));
          }
          box.label = label_of();
          s.boxes.push_back(std::move(box));
          break;
        }
        case SourceKind::InstanceSeg: {
          MaskAnnotation m;
          m.mask = Mask(s.width, s.height);
          decode_segmentation(member(anns[a], "segmentation", p), m.mask, p + ".segmentation");
          if (m.mask.count() == 0) fail(p + ".segmentation", "covers no pixel centers");
          m.label = label_of();
          s.masks.push_back(std::move(m));
          break;
        }
        case SourceKind::Classification:
          classes[it->second].insert(integer(member(anns[a], "category_id", p), p + ".category_id"));
          if (classes[it->second].size() > 1) fail(p + ".category_id", "image has more than one class label");
          s.label = label_of();
          break;
        case SourceKind::Caption: {
          const std::string caption = string(member(anns[a], "caption", p), p + ".caption");
          if (caption.find_first_not_of(" \t\r\n") == std::string::npos) fail(p + ".caption", "empty caption");
          s.captions.push_back(caption);
          break;
        }
        case SourceKind::SemanticSeg:
          break;
      }
    }
  }

  std::vector<AnnotationSource> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& s = sources[i];
    if (kind == SourceKind::SemanticSeg) {
      const json& raw = *entries[i].raw;
      if (!raw.contains("label_map")) continue;
      const std::filesystem::path map(string(raw.at("label_map"), entries[i].path + ".label_map"));
      s.label_map = vision::load_label_map(map.is_absolute() ? map : base_dir / map);
      if (s.label_map.width != s.width || s.label_map.height != s.height) {
        fail(entries[i].path + ".label_map", "label map size differs from the image size");
      }
      if (doc.contains("ignore_label"))
        s.ignore_label = static_cast<int>(integer(doc.at("ignore_label"), "$.ignore_label"));
      for (const auto& [id, name] : categories) s.label_names.emplace(static_cast<int>(id), name);
    } else {
      const bool empty = (kind == SourceKind::Detection && s.boxes.empty()) ||
                         (kind == SourceKind::InstanceSeg && s.masks.empty()) ||
                         (kind == SourceKind::Classification && s.label.empty()) ||
                         (kind == SourceKind::Caption && s.captions.empty());
      if (empty) continue;
    }
    try {
      s.validate();
    } catch (const ValidationError& e) {
      fail(entries[i].path, e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AnnotationSource> ingest_coco_style(const std::filesystem::path& path, SourceKind kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_coco_style(doc, kind, path.parent_path());
}

}  // namespace vprompt::data
