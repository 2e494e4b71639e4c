// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vprompt/data/convert.hpp"
#include "vprompt/data/record.hpp"
#include "vprompt/vision/image.hpp"

namespace vprompt::data {

/// Background categories and object classes of the generated scenes.
const std::vector<std::string>& synthetic_backgrounds();
const std::vector<std::string>& synthetic_objects();

/// A flat-colored background with 1..max_objects non-overlapping rectangles.
struct SyntheticScene {
  std::string background;
  std::vector<BoxAnnotation> objects;
  vision::Image image;
};

SyntheticScene synthetic_scene(int size, int max_objects, std::uint64_t seed);

/// "a harbor with a ship and a vehicle"
std::string scene_caption(const SyntheticScene& scene);
/// "a small ship" / "a large ship", by box area relative to the image.
std::string object_caption(const BoxAnnotation& object, int image_size);

/// Image-level, box and point tasks. Relationship and grounded tasks come
/// from augment_captions instead.
bool synthetic_supports(Task task);

/// Builds one record of `task` on `scene`; `image` becomes the record's path.
InstructionRecord synthetic_record(const SyntheticScene& scene, Task task, const std::string& image);

struct SyntheticOptions {
  int image_size = 32;
  int max_objects = 2;
  int records_per_task = 2;
  std::vector<Task> tasks{Task::SceneClassification, Task::ImageCaption, Task::ReferringClassificationBox,
                          Task::ReferringClassificationPoint};
  std::uint64_t seed = 0;
};

/// Writes one PPM per record under `dir`/images and returns the records, with
/// image paths relative to `dir`. Records are grouped by task in option order.
std::vector<InstructionRecord> build_synthetic_corpus(const std::filesystem::path& dir,
                                                      const SyntheticOptions& options);

/// Two records each of scene classification, image caption, box and point
/// referring classification, with single-object scenes.
std::vector<InstructionRecord> overfit_corpus(const std::filesystem::path& dir, std::uint64_t seed = 0);

}  // namespace vprompt::data
