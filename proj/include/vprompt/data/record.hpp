// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "vprompt/prompt/prompt.hpp"

namespace vprompt::data {

/// Largest mark index usable in answers ("<Region 32>", "<Mark 32>").
inline constexpr int kMaxMarks = 32;

enum class Task {
  SceneClassification,
  ImageCaption,
  RegionCaption,
  ReferringClassificationBox,
  ReferringClassificationPoint,
  Relationship,
  GroundedCaption,
};

const char* task_name(Task task);
Task parse_task(const std::string& name);
std::vector<Task> all_tasks();

/// Prompt level every record of `task` must carry.
prompt::Level task_level(Task task);
/// Answer-template tag: "Region" or "Mark".
const char* task_tag(Task task);
/// Fixed instruction text of each task.
const std::string& instruction_for(Task task);

struct InstructionRecord {
  std::string image;  // relative to the JSONL file's directory
  int width = 0;
  int height = 0;
  Task task = Task::SceneClassification;
  prompt::Level level = prompt::Level::Image;
  std::vector<prompt::PromptSpec> prompts;
  std::string instruction;
  std::string answer;

  /// Prompts valid and homogeneous, level consistent with the task, answer
  /// marks in bijection with prompt marks, and the answer grammar (including
  /// coordinates) consistent with the prompts. Throws ValidationError.
  void validate() const;
  bool operator==(const InstructionRecord&) const = default;
};

/// Prompt list as stored in records: [{"kind", "coords", "mark"}, ...]; point
/// coords are [x, y].
nlohmann::ordered_json prompts_to_json(const std::vector<prompt::PromptSpec>& prompts);
std::vector<prompt::PromptSpec> prompts_from_json(const nlohmann::json& j, const std::string& where);

nlohmann::ordered_json to_json(const InstructionRecord& record);
/// `where` prefixes diagnostics (e.g. "records.jsonl:3").
InstructionRecord record_from_json(const nlohmann::json& j, const std::string& where);

/// Validates every record before writing.
void write_jsonl(const std::vector<InstructionRecord>& records, const std::filesystem::path& path);
std::vector<InstructionRecord> read_jsonl(const std::filesystem::path& path);

/// Image path of a record read from `jsonl`: relative paths are taken from
/// the JSONL file's directory.
std::filesystem::path resolve_image(const InstructionRecord& record, const std::filesystem::path& jsonl);

}  // namespace vprompt::data
