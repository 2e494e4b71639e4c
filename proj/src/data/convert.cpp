// SPDX-License-Identifier: Apache-2.0
#include "vprompt/data/convert.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

#include "vprompt/core/errors.hpp"
#include "vprompt/data/answer.hpp"

namespace vprompt::data {

namespace {

struct KindName {
  SourceKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {{SourceKind::Detection, "detection"},
                                   {SourceKind::InstanceSeg, "instance_seg"},
                                   {SourceKind::SemanticSeg, "semantic_seg"},
                                   {SourceKind::Classification, "classification"},
                                   {SourceKind::Caption, "caption"}};

// Collapses internal whitespace (including newlines) and trims.
std::string clean_text(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

InstructionRecord make_record(const AnnotationSource& src, Task task, std::vector<prompt::PromptSpec> prompts,
                              const std::vector<std::string>& labels) {
  InstructionRecord r;
  r.image = src.image;
  r.width = src.width;
  r.height = src.height;
  r.task = task;
  r.level = task_level(task);
  r.instruction = instruction_for(task);
  r.answer = render_answer(answer_for(task, prompts, labels));
  r.prompts = std::move(prompts);
  r.validate();
  return r;
}

std::string context(const AnnotationSource& src) {
  return std::string(source_kind_name(src.kind)) + " source " + src.image;
}

}  // namespace

const char* source_kind_name(SourceKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "?";
}

SourceKind parse_source_kind(const std::string& name) {
  for (const auto& k : kKindNames) {
    if (name == k.name) return k.kind;
  }
  throw ValidationError("unknown source kind '" + name + "'");
}

std::size_t Mask::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

void AnnotationSource::validate() const {
  const std::string ctx = context(*this);
  if (image.empty()) throw ValidationError(ctx + ": empty image path");
  if (width <= 0 || height <= 0) throw ValidationError(ctx + ": image size must be positive");
  switch (kind) {
    case SourceKind::Detection:
      if (boxes.empty()) throw ValidationError(ctx + ": no boxes");
      for (const auto& b : boxes) {
        const auto& c = b.box;
        if (c[0] < 0 || c[1] < 0 || c[2] > width || c[3] > height || c[0] >= c[2] || c[1] >= c[3]) {
          throw ValidationError(ctx + ": box [" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," +
                                std::to_string(c[2]) + "," + std::to_string(c[3]) + "] outside the image or empty");
        }
      }
      break;
    case SourceKind::InstanceSeg:
      if (masks.empty()) throw ValidationError(ctx + ": no masks");
      for (const auto& m : masks) {
        if (m.mask.width != width || m.mask.height != height)
          throw ValidationError(ctx + ": mask size differs from image");
        if (m.mask.count() == 0) throw ValidationError(ctx + ": empty mask for '" + m.label + "'");
      }
      break;
    case SourceKind::SemanticSeg:
      if (label_map.width != width || label_map.height != height) {
        throw ValidationError(ctx + ": label map is " + std::to_string(label_map.width) + "x" +
                              std::to_string(label_map.height) + ", image is " + std::to_string(width) + "x" +
                              std::to_string(height));
      }
      break;
    case SourceKind::Classification:
      if (clean_text(label).empty()) throw ValidationError(ctx + ": missing label");
      break;
    case SourceKind::Caption:
      if (captions.empty()) throw ValidationError(ctx + ": no captions");
      for (const auto& c : captions) {
        if (clean_text(c).empty()) throw ValidationError(ctx + ": empty caption");
      }
      break;
  }
}

std::vector<InstructionRecord> from_classification_or_caption(const AnnotationSource& src) {
  if (src.kind != SourceKind::Classification && src.kind != SourceKind::Caption) {
    throw ValidationError(context(src) + ": expected a classification or caption source");
  }
  src.validate();
  const std::vector<prompt::PromptSpec> whole{prompt::PromptSpec::image_level(src.width, src.height)};
  std::vector<InstructionRecord> out;
  if (src.kind == SourceKind::Classification) {
    out.push_back(make_record(src, Task::SceneClassification, whole, {clean_text(src.label)}));
  } else {
    for (const auto& caption : src.captions) {
      out.push_back(make_record(src, Task::ImageCaption, whole, {clean_text(caption)}));
    }
  }
  return out;
}

std::vector<InstructionRecord> from_detection(const AnnotationSource& src, Task task) {
  if (src.kind != SourceKind::Detection) throw ValidationError(context(src) + ": expected a detection source");
  if (task != Task::ReferringClassificationBox && task != Task::RegionCaption) {
    throw ValidationError(context(src) + ": detection converts to referring classification or region caption");
  }
  src.validate();
  if (src.boxes.size() > static_cast<std::size_t>(kMaxMarks)) {
    throw ValidationError(context(src) + ": " + std::to_string(src.boxes.size()) + " boxes exceed the 32 marks");
  }
  std::vector<prompt::PromptSpec> prompts;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < src.boxes.size(); ++i) {
    const auto& b = src.boxes[i].box;
    prompts.push_back(prompt::PromptSpec::box(b[0], b[1], b[2], b[3], static_cast<int>(i + 1)));
    labels.push_back(clean_text(src.boxes[i].label));
  }
  return {make_record(src, task, std::move(prompts), labels)};
}

std::vector<long long> squared_distance_to_background(const Mask& mask) {
  const int w = mask.width + 2, h = mask.height + 2;
  constexpr double kFar = 1e15;
  std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) grid[static_cast<std::size_t>(y + 1) * w + x + 1] = kFar;
    }
  }
  // One-dimensional lower envelope of parabolas (Felzenszwalb-Huttenlocher).
  auto transform = [](std::vector<double>& f) {
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1), d(n);
    int k = 0;
    v[0] = 0;
    z[0] = -1e300;
    z[1] = 1e300;
    for (int q = 1; q < n; ++q) {
      double s;
      while (true) {
        const int p = v[k];
        s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
        if (s <= z[k] && k > 0) {
          --k;
        } else {
          break;
        }
      }
      if (s <= z[k]) {
        v[0] = q;
        z[0] = -1e300;
        z[1] = 1e300;
        k = 0;
        continue;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = 1e300;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[k + 1] < q) ++k;
      const double diff = q - v[k];
      d[q] = diff * diff + f[v[k]];
    }
    f = std::move(d);
  };
  std::vector<double> line;
  for (int x = 0; x < w; ++x) {
    line.assign(static_cast<std::size_t>(h), 0.0);
    for (int y = 0; y < h; ++y) line[y] = grid[static_cast<std::size_t>(y) * w + x];
    transform(line);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = line[y];
  }
  for (int y = 0; y < h; ++y) {
    line.assign(grid.begin() + static_cast<std::ptrdiff_t>(y) * w,
                grid.begin() + static_cast<std::ptrdiff_t>(y + 1) * w);
    transform(line);
    std::copy(line.begin(), line.end(), grid.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  std::vector<long long> out(static_cast<std::size_t>(mask.width) * mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      out[static_cast<std::size_t>(y) * mask.width + x] =
          static_cast<long long>(grid[static_cast<std::size_t>(y + 1) * w + x + 1] + 0.5);
    }
  }
  return out;
}

Point representative_point(const Mask& mask) {
  const auto dist = squared_distance_to_background(mask);
  long long best = -1;
  Point p;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const long long d = dist[static_cast<std::size_t>(y) * mask.width + x];
      if (mask.at(x, y) && d > best) {
        best = d;
        p = {x, y};
      }
    }
  }
  if (best < 0) throw ValidationError("representative_point: empty mask");
  return p;
}

std::vector<InstructionRecord> from_instance_seg(const AnnotationSource& src) {
  if (src.kind != SourceKind::InstanceSeg) throw ValidationError(context(src) + ": expected an instance_seg source");
  src.validate();
  if (src.masks.size() > static_cast<std::size_t>(kMaxMarks)) {
    throw ValidationError(context(src) + ": " + std::to_string(src.masks.size()) + " instances exceed the 32 marks");
  }
  std::vector<prompt::PromptSpec> prompts;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < src.masks.size(); ++i) {
    const Point p = representative_point(src.masks[i].mask);
    prompts.push_back(prompt::PromptSpec::point(p.x, p.y, static_cast<int>(i + 1)));
    labels.push_back(clean_text(src.masks[i].label));
  }
  return {make_record(src, Task::ReferringClassificationPoint, std::move(prompts), labels)};
}

std::vector<SampledPoint> sample_semantic_points(const vision::LabelMap& map, int grid, int samples_per_patch,
                                                 std::uint64_t seed, int ignore_label) {
  if (grid < 1) throw ValidationError("semantic sampling: grid must be >= 1");
  if (samples_per_patch < 1) throw ValidationError("semantic sampling: samples_per_patch must be >= 1");
  if (map.width <= 0 || map.height <= 0) throw ValidationError("semantic sampling: empty label map");
  const int gy = std::min(grid, map.height), gx = std::min(grid, map.width);
  std::mt19937_64 rng(seed);
  std::vector<SampledPoint> out;
  for (int i = 0; i < gy; ++i) {
    const int y0 = static_cast<int>(static_cast<long long>(i) * map.height / gy);
    const int y1 = static_cast<int>(static_cast<long long>(i + 1) * map.height / gy);
    for (int j = 0; j < gx; ++j) {
      const int x0 = static_cast<int>(static_cast<long long>(j) * map.width / gx);
      const int x1 = static_cast<int>(static_cast<long long>(j + 1) * map.width / gx);
      const long long area = static_cast<long long>(y1 - y0) * (x1 - x0);
      const long long want = std::min<long long>(samples_per_patch, area);
      std::uniform_int_distribution<long long> pick(0, area - 1);
      std::set<long long> chosen;
      std::vector<long long> order;
      while (static_cast<long long>(chosen.size()) < want) {
        const long long idx = pick(rng);
        if (chosen.insert(idx).second) order.push_back(idx);
      }
      for (long long idx : order) {
        const int x = x0 + static_cast<int>(idx % (x1 - x0));
        const int y = y0 + static_cast<int>(idx / (x1 - x0));
        const int label = map.at(x, y);
        if (label != ignore_label) out.push_back({{x, y}, label});
      }
    }
  }
  return out;
}

std::vector<InstructionRecord> from_semantic_seg(const AnnotationSource& src, int grid, int samples_per_patch,
                                                 std::uint64_t seed) {
  if (src.kind != SourceKind::SemanticSeg) throw ValidationError(context(src) + ": expected a semantic_seg source");
  src.validate();
  const auto points = sample_semantic_points(src.label_map, grid, samples_per_patch, seed, src.ignore_label);
  if (points.empty()) throw ValidationError(context(src) + ": every sampled point carries the ignore label");
  std::vector<InstructionRecord> out;
  for (std::size_t begin = 0; begin < points.size(); begin += kMaxMarks) {
    const std::size_t end = std::min(points.size(), begin + kMaxMarks);
    std::vector<prompt::PromptSpec> prompts;
    std::vector<std::string> labels;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& sp = points[i];
      prompts.push_back(prompt::PromptSpec::point(sp.point.x, sp.point.y, static_cast<int>(i - begin + 1)));
      if (src.label_names.empty()) {
        labels.push_back(std::to_string(sp.label));
      } else {
        auto it = src.label_names.find(sp.label);
        if (it == src.label_names.end()) {
          throw ValidationError(context(src) + ": label " + std::to_string(sp.label) + " has no category name");
        }
        labels.push_back(clean_text(it->second));
      }
    }
    out.push_back(make_record(src, Task::ReferringClassificationPoint, std::move(prompts), labels));
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<InstructionRecord> convert(const AnnotationSource& src, int grid, int samples_per_patch,
                                       std::uint64_t root_seed) {
  switch (src.kind) {
    case SourceKind::Detection:
      return from_detection(src);
    case SourceKind::InstanceSeg:
      return from_instance_seg(src);
    case SourceKind::SemanticSeg:
      return from_semantic_seg(src, grid, samples_per_patch, splitmix64(root_seed ^ src.image_id));
    case SourceKind::Classification:
    case SourceKind::Caption:
      return from_classification_or_caption(src);
  }
  throw ValidationError("convert: unknown source kind");
}

}  // namespace vprompt::data
