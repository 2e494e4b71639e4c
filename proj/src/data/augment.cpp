// SPDX-License-Identifier: Apache-2.0
#include "vprompt/data/augment.hpp"

#include <cctype>
#include <cstdlib>

#include "vprompt/core/errors.hpp"
#include "vprompt/data/answer.hpp"

namespace vprompt::data {

namespace {

std::string ref(int mark) { return "<Region " + std::to_string(mark) + ">"; }

std::string with_article(const std::string& noun) {
  const char c = noun.empty() ? 'x' : static_cast<char>(std::tolower(static_cast<unsigned char>(noun[0])));
  const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
  return std::string(vowel ? "an " : "a ") + noun;
}

// Third of the image holding the box center, per axis.
std::string location(const std::array<int, 4>& box, int width, int height) {
  const long cx2 = box[0] + box[2], cy2 = box[1] + box[3];  // twice the center
  const int col = cx2 * 3 < 2L * width ? 0 : (cx2 * 3 < 4L * width ? 1 : 2);
  const int row = cy2 * 3 < 2L * height ? 0 : (cy2 * 3 < 4L * height ? 1 : 2);
  static const char* rows[] = {"top", "middle", "bottom"};
  static const char* cols[] = {"left", "center", "right"};
  if (row == 1 && col == 1) return "center";
  if (row == 1) return std::string("middle ") + cols[col];
  if (col == 1) return std::string(rows[row]) + " center";
  return std::string(rows[row]) + " " + cols[col];
}

}  // namespace

std::string spatial_relation(const std::array<int, 4>& a, const std::array<int, 4>& b) {
  const long dx = (b[0] + b[2]) - (a[0] + a[2]);
  const long dy = (b[1] + b[3]) - (a[1] + a[3]);
  if (std::labs(dx) >= std::labs(dy)) return dx >= 0 ? "to the left of" : "to the right of";
  return dy >= 0 ? "above" : "below";
}

std::string StubAugmenter::generate(Task target, const std::vector<RegionInfo>& regions, int width, int height) {
  if (regions.empty()) throw ValidationError("augmenter: no regions");
  std::string out;
  auto sentence = [&out](const std::string& s) {
    if (!out.empty()) out += ' ';
    out += s;
  };
  if (target == Task::Relationship) {
    if (regions.size() < 2) throw ValidationError("augmenter: relationship needs at least two regions");
    for (std::size_t i = 0; i < regions.size(); ++i) {
      for (std::size_t j = i + 1; j < regions.size(); ++j) {
        const auto& a = regions[i];
        const auto& b = regions[j];
        sentence("The " + a.label + " " + ref(a.mark) + " is " + spatial_relation(a.box, b.box) + " the " + b.label +
                 " " + ref(b.mark) + ".");
      }
    }
    return out;
  }
  if (target == Task::GroundedCaption) {
    for (const auto& r : regions) {
      sentence(ref(r.mark) + " shows " + with_article(r.label) + " in the " + location(r.box, width, height) +
               " of the image.");
    }
    return out;
  }
  throw ValidationError(std::string("augmenter: unsupported target ") + task_name(target));
}

AugmentResult augment_captions(const std::vector<InstructionRecord>& records, Augmenter& augmenter,
                               const std::vector<Task>& targets) {
  AugmentResult result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& src = records[i];
    if (task_coords(src.task) != CoordKind::Bbox) continue;
    std::vector<RegionInfo> regions;
    for (const auto& [mark, label] : parse_answer(src.answer, src.task).labels) {
      for (const auto& p : src.prompts) {
        if (p.mark == mark) regions.push_back({mark, p.coords, label});
      }
    }
    for (Task target : targets) {
      try {
        InstructionRecord r = src;
        r.task = target;
        r.level = task_level(target);
        r.instruction = instruction_for(target);
        r.answer = augmenter.generate(target, regions, src.width, src.height);
        r.validate();
        result.records.push_back(std::move(r));
      } catch (const std::exception& e) {
        result.errors.push_back("record " + std::to_string(i) + " (" + task_name(target) + "): " + e.what());
      }
    }
  }
  return result;
}

}  // namespace vprompt::data
