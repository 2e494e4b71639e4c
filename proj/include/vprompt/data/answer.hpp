// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vprompt/core/errors.hpp"
#include "vprompt/data/record.hpp"

namespace vprompt::data {

enum class CoordKind { None, Bbox, Points };

/// Structured form of a templated answer:
///   "<Tag k>: label" lines joined by "\n", then optionally a final line
///   "'bbox':[x1,y1,x2,y2],..." or "'points':[x,y],...".
struct Answer {
  std::string tag = "Region";
  std::vector<std::pair<int, std::string>> labels;
  CoordKind coords_kind = CoordKind::None;
  std::vector<std::vector<int>> coords;  // one entry per label

  bool operator==(const Answer&) const = default;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : ValidationError("answer: at offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Coordinate format each templated task uses; Relationship and
/// GroundedCaption answers are free text.
bool is_templated(Task task);
CoordKind task_coords(Task task);

/// Throws ValidationError on empty/multi-line/padded labels, marks outside
/// 1..32, or coordinate arity mismatches.
std::string render_answer(const Answer& answer);

/// Strict parser for templated tasks; throws ParseError with the offset of the
/// first offending character.
Answer parse_answer(std::string_view text, Task task);

/// Every "<Region k>" / "<Mark k>" reference in free text, in order of appearance.
std::vector<std::pair<std::string, int>> mark_references(std::string_view text);

/// Builds the answer of a record from labels listed in mark order.
Answer answer_for(Task task, const std::vector<prompt::PromptSpec>& prompts, const std::vector<std::string>& labels);

}  // namespace vprompt::data
