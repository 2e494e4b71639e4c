// SPDX-License-Identifier: Apache-2.0
#include "vprompt/data/synthetic.hpp"

#include <algorithm>
#include <random>

#include "vprompt/core/errors.hpp"
#include "vprompt/data/answer.hpp"

namespace vprompt::data {

namespace {

struct Rgb {
  double r, g, b;
};

const Rgb kBackgroundColors[] = {{0.55, 0.55, 0.55}, {0.30, 0.60, 0.25}, {0.15, 0.30, 0.65}, {0.85, 0.75, 0.45}};
const Rgb kObjectColors[] = {{0.95, 0.95, 0.95}, {0.85, 0.15, 0.10}, {0.10, 0.10, 0.10}, {0.35, 0.40, 0.15}};

bool overlaps(const std::array<int, 4>& a, const std::array<int, 4>& b) {
  return a[0] < b[2] && b[0] < a[2] && a[1] < b[3] && b[1] < a[3];
}

std::string article(const std::string& noun) {
  const char c = noun.empty() ? 'x' : noun[0];
  return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') ? "an " + noun : "a " + noun;
}

}  // namespace

const std::vector<std::string>& synthetic_backgrounds() {
  static const std::vector<std::string> names{"airport", "farmland", "harbor", "desert"};
  return names;
}

const std::vector<std::string>& synthetic_objects() {
  static const std::vector<std::string> names{"airplane", "ship", "vehicle", "tank"};
  return names;
}

SyntheticScene synthetic_scene(int size, int max_objects, std::uint64_t seed) {
  if (size < 8) throw ValidationError("synthetic scene: size must be >= 8");
  if (max_objects < 1 || max_objects > 4) throw ValidationError("synthetic scene: max_objects must be in 1..4");
  std::mt19937_64 rng(seed);
  SyntheticScene scene;
  const int bg = std::uniform_int_distribution<int>(0, 3)(rng);
  scene.background = synthetic_backgrounds()[bg];
  scene.image = vision::Image(size, size);
  std::uniform_real_distribution<double> noise(-0.04, 0.04);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Rgb c = kBackgroundColors[bg];
      scene.image.at(x, y, 0) = c.r + noise(rng);
      scene.image.at(x, y, 1) = c.g + noise(rng);
      scene.image.at(x, y, 2) = c.b + noise(rng);
    }
  }
  const int count = std::uniform_int_distribution<int>(1, max_objects)(rng);
  std::uniform_int_distribution<int> side(std::max(2, size / 5), std::max(3, size / 3));
  for (int attempt = 0; attempt < 200 && static_cast<int>(scene.objects.size()) < count; ++attempt) {
    const int w = side(rng), h = side(rng);
    const int x = std::uniform_int_distribution<int>(0, size - w)(rng);
    const int y = std::uniform_int_distribution<int>(0, size - h)(rng);
    const std::array<int, 4> box{x, y, x + w, y + h};
    if (std::any_of(scene.objects.begin(), scene.objects.end(),
                    [&](const BoxAnnotation& o) { return overlaps(o.box, box); })) {
      continue;
    }
    const int cls = std::uniform_int_distribution<int>(0, 3)(rng);
    scene.objects.push_back({box, synthetic_objects()[cls]});
    const Rgb c = kObjectColors[cls];
    for (int yy = box[1]; yy < box[3]; ++yy) {
      for (int xx = box[0]; xx < box[2]; ++xx) {
        scene.image.at(xx, yy, 0) = c.r;
        scene.image.at(xx, yy, 1) = c.g;
        scene.image.at(xx, yy, 2) = c.b;
      }
    }
  }
  for (double& v : scene.image.data) v = std::clamp(v, 0.0, 1.0);
  return scene;
}

std::string scene_caption(const SyntheticScene& scene) {
  std::string out = article(scene.background) + " with ";
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (i > 0) out += i + 1 == scene.objects.size() ? " and " : ", ";
    out += article(scene.objects[i].label);
  }
  return out;
}

std::string object_caption(const BoxAnnotation& object, int image_size) {
  const long area = static_cast<long>(object.box[2] - object.box[0]) * (object.box[3] - object.box[1]);
  const bool large = area * 16 >= static_cast<long>(image_size) * image_size;
  return std::string(large ? "a large " : "a small ") + object.label;
}

bool synthetic_supports(Task task) { return task != Task::Relationship && task != Task::GroundedCaption; }

InstructionRecord synthetic_record(const SyntheticScene& scene, Task task, const std::string& image) {
  if (!synthetic_supports(task))
    throw ValidationError(std::string("synthetic corpus has no ") + task_name(task) + " records");
  const int size = scene.image.width;
  std::vector<prompt::PromptSpec> prompts;
  std::vector<std::string> labels;
  switch (task) {
    case Task::SceneClassification:
      prompts.push_back(prompt::PromptSpec::image_level(size, size));
      labels.push_back(scene.background);
      break;
    case Task::ImageCaption:
      prompts.push_back(prompt::PromptSpec::image_level(size, size));
      labels.push_back(scene_caption(scene));
      break;
    default:
      for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const auto& o = scene.objects[i];
        const int mark = static_cast<int>(i + 1);
        if (task == Task::ReferringClassificationPoint) {
          Mask mask(size, size);
          for (int y = o.box[1]; y < o.box[3]; ++y) {
            for (int x = o.box[0]; x < o.box[2]; ++x) mask.set(x, y);
          }
          const Point p = representative_point(mask);
          prompts.push_back(prompt::PromptSpec::point(p.x, p.y, mark));
        } else {
          prompts.push_back(prompt::PromptSpec::box(o.box[0], o.box[1], o.box[2], o.box[3], mark));
        }
        labels.push_back(task == Task::RegionCaption ? object_caption(o, size) : o.label);
      }
      break;
  }
  InstructionRecord r;
  r.image = image;
  r.width = size;
  r.height = size;
  r.task = task;
  r.level = task_level(task);
  r.instruction = instruction_for(task);
  r.answer = render_answer(answer_for(task, prompts, labels));
  r.prompts = std::move(prompts);
  r.validate();
  return r;
}

std::vector<InstructionRecord> build_synthetic_corpus(const std::filesystem::path& dir,
                                                      const SyntheticOptions& options) {
  if (options.records_per_task < 1) throw ValidationError("synthetic corpus: records_per_task must be >= 1");
  std::vector<InstructionRecord> out;
  for (Task task : options.tasks) {
    for (int i = 0; i < options.records_per_task; ++i) {
      const std::uint64_t seed = splitmix64(
          options.seed ^ splitmix64(static_cast<std::uint64_t>(task) * 100003ULL + static_cast<std::uint64_t>(i)));
      const SyntheticScene scene = synthetic_scene(options.image_size, options.max_objects, seed);
      const std::string image = "images/" + std::string(task_name(task)) + "_" + std::to_string(i) + ".ppm";
      std::filesystem::create_directories((dir / image).parent_path());
      vision::save_ppm(scene.image, dir / image);
      out.push_back(synthetic_record(scene, task, image));
    }
  }
  return out;
}

std::vector<InstructionRecord> overfit_corpus(const std::filesystem::path& dir, std::uint64_t seed) {
  SyntheticOptions options;
  options.max_objects = 1;
  options.seed = seed;
  return build_synthetic_corpus(dir, options);
}

}  // namespace vprompt::data
