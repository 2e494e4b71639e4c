// SPDX-License-Identifier: Apache-2.0
#include "vprompt/data/record.hpp"

#include <fstream>
#include <set>

#include "vprompt/core/errors.hpp"
#include "vprompt/data/answer.hpp"

namespace vprompt::data {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct TaskInfo {
  Task task;
  const char* name;
  prompt::Level level;
  const char* tag;
  std::string instruction;
};

const std::vector<TaskInfo>& task_table() {
  static const std::vector<TaskInfo> table{
      {Task::SceneClassification, "scene_classification", prompt::Level::Image, "Region",
       "Please identify the object category of each marked region in the image"},
      {Task::ImageCaption, "image_caption", prompt::Level::Image, "Region",
       "Please provide a detailed description of the <Region 1> in the image"},
      {Task::RegionCaption, "region_caption", prompt::Level::Region, "Region",
       "Please provide the brief caption of each marked region in the image"},
      {Task::ReferringClassificationBox, "referring_classification_box", prompt::Level::Region, "Region",
       "Please identify the category of each marked region in the image"},
      {Task::ReferringClassificationPoint, "referring_classification_point", prompt::Level::Point, "Mark",
       "Please identify the category of each marked point in the image"},
      {Task::Relationship, "relationship", prompt::Level::Region, "Region",
       "Please analyze the relationship between all marked regions in the image."},
      {Task::GroundedCaption, "grounded_caption", prompt::Level::Region, "Region",
       "Please provide a detailed description of each marked region in the image"},
  };
  return table;
}

const TaskInfo& info(Task task) {
  for (const auto& t : task_table()) {
    if (t.task == task) return t;
  }
  throw ValidationError("unknown task");
}

}  // namespace

const char* task_name(Task task) { return info(task).name; }

Task parse_task(const std::string& name) {
  for (const auto& t : task_table()) {
    if (name == t.name) return t.task;
  }
  throw ValidationError("unknown task '" + name + "'");
}

std::vector<Task> all_tasks() {
  std::vector<Task> out;
  for (const auto& t : task_table()) out.push_back(t.task);
  return out;
}

prompt::Level task_level(Task task) { return info(task).level; }
const char* task_tag(Task task) { return info(task).tag; }
const std::string& instruction_for(Task task) { return info(task).instruction; }

void InstructionRecord::validate() const {
  const std::string ctx = std::string("record (") + task_name(task) + ", " + image + ")";
  if (image.empty()) throw ValidationError(ctx + ": empty image path");
  if (width <= 0 || height <= 0) throw ValidationError(ctx + ": image size must be positive");
  if (instruction.empty()) throw ValidationError(ctx + ": empty instruction");
  if (prompts.empty()) throw ValidationError(ctx + ": no prompts");
  prompt::validate_prompts(prompts, width, height);
  const auto actual = prompt::level_of(prompts);
  if (actual != level) {
    throw ValidationError(ctx + ": level " + prompt::level_name(level) + " but prompts are " +
                          prompt::level_name(actual));
  }
  if (level != task_level(task)) {
    throw ValidationError(ctx + ": task requires level " + prompt::level_name(task_level(task)));
  }
  if (level == prompt::Level::Image && prompts.size() != 1)
    throw ValidationError(ctx + ": image level takes one prompt");

  const std::string tag = task_tag(task);
  std::set<int> prompt_marks, answer_marks;
  for (const auto& p : prompts) prompt_marks.insert(p.mark);
  for (const auto& [ref_tag, k] : mark_references(answer)) {
    if (ref_tag != tag) throw ValidationError(ctx + ": answer uses <" + ref_tag + " k>, expected <" + tag + " k>");
    answer_marks.insert(k);
  }
  if (prompt_marks != answer_marks) throw ValidationError(ctx + ": answer marks do not match prompt marks");

  if (!is_templated(task)) return;
  Answer parsed;
  try {
    parsed = parse_answer(answer, task);
  } catch (const ParseError& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
  if (parsed.labels.size() != prompts.size()) throw ValidationError(ctx + ": one answer line per prompt required");
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (parsed.labels[i].first != prompts[i].mark)
      throw ValidationError(ctx + ": answer lines must follow prompt order");
    if (parsed.coords_kind == CoordKind::Bbox &&
        parsed.coords[i] != std::vector<int>(prompts[i].coords.begin(), prompts[i].coords.end())) {
      throw ValidationError(ctx + ": bbox " + std::to_string(i + 1) + " differs from its prompt");
    }
    if (parsed.coords_kind == CoordKind::Points &&
        parsed.coords[i] != std::vector<int>{prompts[i].x(), prompts[i].y()}) {
      throw ValidationError(ctx + ": point " + std::to_string(i + 1) + " differs from its prompt");
    }
  }
}

ordered_json to_json(const InstructionRecord& r) {
  const ordered_json prompts = prompts_to_json(r.prompts);
  return {{"image", r.image},
          {"width", r.width},
          {"height", r.height},
          {"task", task_name(r.task)},
          {"level", prompt::level_name(r.level)},
          {"prompts", prompts},
          {"instruction", r.instruction},
          {"answer", r.answer}};
}

namespace {

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  return j.at(key);
}

template <typename T>
T typed(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": wrong type (" + std::string(j.type_name()) + ")");
  }
}

}  // namespace

ordered_json prompts_to_json(const std::vector<prompt::PromptSpec>& prompts) {
  ordered_json out = ordered_json::array();
  for (const auto& p : prompts) {
    ordered_json coords = p.kind == prompt::PromptKind::Point ? ordered_json{p.x(), p.y()} : ordered_json(p.coords);
    out.push_back({{"kind", prompt::kind_name(p.kind)}, {"coords", coords}, {"mark", p.mark}});
  }
  return out;
}

std::vector<prompt::PromptSpec> prompts_from_json(const json& prompts, const std::string& where) {
  if (!prompts.is_array()) throw ValidationError(where + ": expected an array");
  std::vector<prompt::PromptSpec> out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const std::string pw = where + "[" + std::to_string(i) + "]";
    const json& p = prompts[i];
    if (!p.is_object()) throw ValidationError(pw + ": expected an object");
    prompt::PromptSpec spec;
    spec.kind = prompt::parse_kind(typed<std::string>(field(p, "kind", pw), pw + ".kind"));
    spec.mark = typed<int>(field(p, "mark", pw), pw + ".mark");
    auto coords = typed<std::vector<int>>(field(p, "coords", pw), pw + ".coords");
    const std::size_t arity = spec.kind == prompt::PromptKind::Point ? 2 : 4;
    if (coords.size() != arity) {
      throw ValidationError(pw + ".coords: expected " + std::to_string(arity) + " integers");
    }
    std::copy(coords.begin(), coords.end(), spec.coords.begin());
    out.push_back(spec);
  }
  return out;
}

InstructionRecord record_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": record must be a JSON object");
  InstructionRecord r;
  r.image = typed<std::string>(field(j, "image", where), where + ".image");
  r.width = typed<int>(field(j, "width", where), where + ".width");
  r.height = typed<int>(field(j, "height", where), where + ".height");
  r.task = parse_task(typed<std::string>(field(j, "task", where), where + ".task"));
  r.level = prompt::parse_level(typed<std::string>(field(j, "level", where), where + ".level"));
  r.instruction = typed<std::string>(field(j, "instruction", where), where + ".instruction");
  r.answer = typed<std::string>(field(j, "answer", where), where + ".answer");
  r.prompts = prompts_from_json(field(j, "prompts", where), where + ".prompts");
  try {
    r.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return r;
}

void write_jsonl(const std::vector<InstructionRecord>& records, const std::filesystem::path& path) {
  for (const auto& r : records) r.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  for (const auto& r : records) os << to_json(r).dump() << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<InstructionRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<InstructionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + ": invalid JSON: " + e.what());
    }
    out.push_back(record_from_json(j, where));
  }
  return out;
}

std::filesystem::path resolve_image(const InstructionRecord& record, const std::filesystem::path& jsonl) {
  const std::filesystem::path image(record.image);
  return image.is_absolute() ? image : jsonl.parent_path() / image;
}

}  // namespace vprompt::data
