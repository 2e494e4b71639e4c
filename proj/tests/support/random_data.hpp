// SPDX-License-Identifier: Apache-2.0
// Random annotation sources and records for property tests.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "vprompt/data/answer.hpp"
#include "vprompt/data/convert.hpp"
#include "vprompt/data/record.hpp"

namespace testdata {

using vprompt::data::AnnotationSource;
using vprompt::data::InstructionRecord;
using vprompt::data::Mask;
using vprompt::data::SourceKind;
using vprompt::data::Task;

inline int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::string random_label(std::mt19937_64& rng) {
  static const std::vector<std::string> words{"airplane", "ship",   "storage", "tank",  "small-vehicle", "harbor",
                                              "bridge",   "runway", "white",   "large", "docked,",       "(two)",
                                              "roof's",   "3",      "45.5%",   "near"};
  std::string out;
  const int n = uniform(rng, 1, 4);
  for (int i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += words[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(words.size()) - 1))];
  }
  return out;
}

/// Union of a few rectangles and discs; never empty.
inline Mask random_mask(std::mt19937_64& rng, int w, int h) {
  Mask m(w, h);
  const int shapes = uniform(rng, 1, 3);
  for (int s = 0; s < shapes; ++s) {
    const int cx = uniform(rng, 0, w - 1), cy = uniform(rng, 0, h - 1);
    const int rx = uniform(rng, 0, std::max(1, w / 2)), ry = uniform(rng, 0, std::max(1, h / 2));
    const bool disc = uniform(rng, 0, 1) == 1;
    for (int y = std::max(0, cy - ry); y <= std::min(h - 1, cy + ry); ++y) {
      for (int x = std::max(0, cx - rx); x <= std::min(w - 1, cx + rx); ++x) {
        const double nx = rx ? double(x - cx) / rx : 0.0, ny = ry ? double(y - cy) / ry : 0.0;
        if (!disc || nx * nx + ny * ny <= 1.0) m.set(x, y);
      }
    }
  }
  return m;
}

inline std::array<int, 4> random_box(std::mt19937_64& rng, int w, int h) {
  const int x1 = uniform(rng, 0, w - 1), y1 = uniform(rng, 0, h - 1);
  return {x1, y1, uniform(rng, x1 + 1, w), uniform(rng, y1 + 1, h)};
}

inline AnnotationSource random_source(std::mt19937_64& rng, std::uint64_t id) {
  AnnotationSource s;
  s.kind = static_cast<SourceKind>(uniform(rng, 0, 4));
  s.image = "images/" + std::to_string(id) + ".png";
  s.image_id = id;
  s.width = uniform(rng, 4, 48);
  s.height = uniform(rng, 4, 48);
  switch (s.kind) {
    case SourceKind::Detection:
      for (int i = uniform(rng, 1, 8); i > 0; --i)
        s.boxes.push_back({random_box(rng, s.width, s.height), random_label(rng)});
      break;
    case SourceKind::InstanceSeg:
      for (int i = uniform(rng, 1, 5); i > 0; --i)
        s.masks.push_back({random_mask(rng, s.width, s.height), random_label(rng)});
      break;
    case SourceKind::SemanticSeg: {
      s.label_map.width = s.width;
      s.label_map.height = s.height;
      // Label `classes` is the ignore label; it shows up in about a fifth of the pixels.
      const int classes = uniform(rng, 1, 4);
      s.ignore_label = classes;
      for (int i = 0; i < s.width * s.height; ++i) {
        s.label_map.labels.push_back(uniform(rng, 0, 4) == 0 ? classes : uniform(rng, 0, classes - 1));
      }
      for (int c = 0; c < classes; ++c) s.label_names[c] = random_label(rng);
      break;
    }
    case SourceKind::Classification:
      s.label = random_label(rng);
      break;
    case SourceKind::Caption:
      for (int i = uniform(rng, 1, 3); i > 0; --i) s.captions.push_back(random_label(rng));
      break;
  }
  return s;
}

/// Random templated record built directly from prompts and labels.
inline InstructionRecord random_record(std::mt19937_64& rng) {
  static const Task tasks[] = {Task::SceneClassification, Task::ImageCaption, Task::RegionCaption,
                               Task::ReferringClassificationBox, Task::ReferringClassificationPoint};
  InstructionRecord r;
  r.task = tasks[uniform(rng, 0, 4)];
  r.level = vprompt::data::task_level(r.task);
  r.instruction = vprompt::data::instruction_for(r.task);
  r.width = uniform(rng, 2, 600);
  r.height = uniform(rng, 2, 600);
  r.image = "img_" + std::to_string(uniform(rng, 0, 1 << 20)) + ".jpg";
  std::vector<std::string> labels;
  if (r.level == vprompt::prompt::Level::Image) {
    r.prompts.push_back(vprompt::prompt::PromptSpec::image_level(r.width, r.height));
    labels.push_back(random_label(rng));
  } else {
    const int n = uniform(rng, 1, vprompt::data::kMaxMarks);
    for (int k = 1; k <= n; ++k) {
      if (r.level == vprompt::prompt::Level::Point) {
        r.prompts.push_back(
            vprompt::prompt::PromptSpec::point(uniform(rng, 0, r.width - 1), uniform(rng, 0, r.height - 1), k));
      } else {
        const auto b = random_box(rng, r.width, r.height);
        r.prompts.push_back(vprompt::prompt::PromptSpec::box(b[0], b[1], b[2], b[3], k));
      }
      labels.push_back(random_label(rng));
    }
  }
  r.answer = vprompt::data::render_answer(vprompt::data::answer_for(r.task, r.prompts, labels));
  return r;
}

}  // namespace testdata
