// SPDX-License-Identifier: Apache-2.0
#include "vprompt/data/answer.hpp"

#include <cctype>

namespace vprompt::data {

bool is_templated(Task task) { return task != Task::Relationship && task != Task::GroundedCaption; }

CoordKind task_coords(Task task) {
  switch (task) {
    case Task::RegionCaption:
    case Task::ReferringClassificationBox:
      return CoordKind::Bbox;
    case Task::ReferringClassificationPoint:
      return CoordKind::Points;
    default:
      return CoordKind::None;
  }
}

namespace {

const char* coord_key(CoordKind kind) { return kind == CoordKind::Bbox ? "bbox" : "points"; }
std::size_t coord_arity(CoordKind kind) { return kind == CoordKind::Bbox ? 4 : 2; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  bool done() const { return pos_ >= text_.size(); }
  std::size_t pos() const { return pos_; }
  char peek() const { return done() ? '\0' : text_[pos_]; }

  void expect(std::string_view token) {
    for (std::size_t i = 0; i < token.size(); ++i) {
      if (pos_ + i >= text_.size() || text_[pos_ + i] != token[i]) {
        fail(pos_ + i, "expected '" + std::string(token) + "'");
      }
    }
    pos_ += token.size();
  }

  bool consume(std::string_view token) {
    if (text_.substr(pos_, token.size()) != token) return false;
    pos_ += token.size();
    return true;
  }

  long integer() {
    const std::size_t start = pos_;
    bool negative = false;
    if (peek() == '-') {
      negative = true;
      ++pos_;
    }
    if (!std::isdigit(static_cast<unsigned char>(peek()))) fail(pos_, "expected a digit");
    long v = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (text_[pos_++] - '0');
      if (v > 1'000'000'000L) fail(start, "integer out of range");
    }
    return negative ? -v : v;
  }

  std::string rest_of_line() {
    const std::size_t start = pos_;
    while (!done() && text_[pos_] != '\n') ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  [[noreturn]] static void fail(std::size_t offset, const std::string& what) { throw ParseError(offset, what); }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

void check_label(const std::string& label, const std::string& context) {
  if (label.empty()) throw ValidationError(context + ": empty label");
  if (label.find('\n') != std::string::npos) throw ValidationError(context + ": label contains a newline");
  if (is_space(label.front()) || is_space(label.back())) {
    throw ValidationError(context + ": label has leading or trailing whitespace");
  }
}

}  // namespace

std::string render_answer(const Answer& answer) {
  if (answer.tag != "Region" && answer.tag != "Mark") throw ValidationError("render_answer: unknown tag " + answer.tag);
  if (answer.labels.empty()) throw ValidationError("render_answer: no labels");
  std::string out;
  for (std::size_t i = 0; i < answer.labels.size(); ++i) {
    const auto& [mark, label] = answer.labels[i];
    if (mark < 1 || mark > kMaxMarks)
      throw ValidationError("render_answer: mark " + std::to_string(mark) + " outside 1..32");
    check_label(label, "render_answer");
    if (i > 0) out += '\n';
    out += "<" + answer.tag + " " + std::to_string(mark) + ">: " + label;
  }
  if (answer.coords_kind == CoordKind::None) {
    if (!answer.coords.empty()) throw ValidationError("render_answer: coordinates without a coordinate kind");
    return out;
  }
  if (answer.coords.size() != answer.labels.size()) {
    throw ValidationError("render_answer: " + std::to_string(answer.coords.size()) + " coordinate groups for " +
                          std::to_string(answer.labels.size()) + " labels");
  }
  out += "\n'";
  out += coord_key(answer.coords_kind);
  out += "':";
  for (std::size_t i = 0; i < answer.coords.size(); ++i) {
    const auto& c = answer.coords[i];
    if (c.size() != coord_arity(answer.coords_kind)) throw ValidationError("render_answer: wrong coordinate arity");
    if (i > 0) out += ',';
    out += '[';
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (j > 0) out += ',';
      out += std::to_string(c[j]);
    }
    out += ']';
  }
  return out;
}

Answer parse_answer(std::string_view text, Task task) {
  if (!is_templated(task)) {
    throw ValidationError(std::string("parse_answer: task ") + task_name(task) + " has free-text answers");
  }
  Answer answer;
  answer.tag = task_tag(task);
  answer.coords_kind = task_coords(task);
  const std::string open = "<" + answer.tag + " ";
  Parser p(text);
  if (p.done()) Parser::fail(0, "empty answer");
  while (true) {
    p.expect(open);
    const std::size_t mark_at = p.pos();
    const long mark = p.integer();
    if (mark < 1 || mark > kMaxMarks) Parser::fail(mark_at, "mark outside 1..32");
    p.expect(">: ");
    const std::size_t label_at = p.pos();
    std::string label = p.rest_of_line();
    if (label.empty()) Parser::fail(label_at, "empty label");
    if (is_space(label.front()) || is_space(label.back())) Parser::fail(label_at, "label has surrounding whitespace");
    answer.labels.emplace_back(static_cast<int>(mark), std::move(label));
    if (p.done()) break;
    p.expect("\n");
    if (p.peek() == '\'') break;
  }
  if (answer.coords_kind == CoordKind::None) {
    if (!p.done()) Parser::fail(p.pos(), "unexpected coordinates for this task");
    return answer;
  }
  if (p.done()) Parser::fail(p.pos(), std::string("missing '") + coord_key(answer.coords_kind) + "' list");
  p.expect(std::string("'") + coord_key(answer.coords_kind) + "':");
  const std::size_t arity = coord_arity(answer.coords_kind);
  do {
    p.expect("[");
    std::vector<int> group;
    for (std::size_t j = 0; j < arity; ++j) {
      if (j > 0) p.expect(",");
      group.push_back(static_cast<int>(p.integer()));
    }
    p.expect("]");
    answer.coords.push_back(std::move(group));
  } while (p.consume(","));
  if (!p.done()) Parser::fail(p.pos(), "trailing characters");
  if (answer.coords.size() != answer.labels.size()) {
    Parser::fail(p.pos(), std::to_string(answer.coords.size()) + " coordinate groups for " +
                              std::to_string(answer.labels.size()) + " labels");
  }
  return answer;
}

std::vector<std::pair<std::string, int>> mark_references(std::string_view text) {
  std::vector<std::pair<std::string, int>> refs;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '<') continue;
    for (std::string_view tag : {std::string_view("Region"), std::string_view("Mark")}) {
      if (text.substr(i + 1, tag.size()) != tag || i + tag.size() + 1 >= text.size() ||
          text[i + tag.size() + 1] != ' ') {
        continue;
      }
      std::size_t j = i + tag.size() + 2;
      long k = 0;
      const std::size_t digits = j;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j])) && k < 1'000'000) {
        k = k * 10 + (text[j++] - '0');
      }
      if (j > digits && j < text.size() && text[j] == '>') refs.emplace_back(std::string(tag), static_cast<int>(k));
    }
  }
  return refs;
}

Answer answer_for(Task task, const std::vector<prompt::PromptSpec>& prompts, const std::vector<std::string>& labels) {
  if (prompts.size() != labels.size()) throw ValidationError("answer_for: one label per prompt required");
  Answer a;
  a.tag = task_tag(task);
  a.coords_kind = task_coords(task);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    a.labels.emplace_back(prompts[i].mark, labels[i]);
    if (a.coords_kind == CoordKind::Bbox) {
      a.coords.push_back({prompts[i].coords.begin(), prompts[i].coords.end()});
    } else if (a.coords_kind == CoordKind::Points) {
      a.coords.push_back({prompts[i].x(), prompts[i].y()});
    }
  }
  return a;
}

}  // namespace vprompt::data
