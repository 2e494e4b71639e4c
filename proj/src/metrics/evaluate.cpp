// SPDX-License-Identifier: Apache-2.0
#include "vprompt/metrics/evaluate.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "vprompt/core/errors.hpp"
#include "vprompt/metrics/text_metrics.hpp"

namespace vprompt::metrics {

const char* family_name(TaskFamily family) {
  switch (family) {
    case TaskFamily::Classification:
      return "classification";
    case TaskFamily::Captioning:
      return "captioning";
    case TaskFamily::ReferringClassification:
      return "referring_classification";
  }
  throw ValidationError("unknown task family");
}

TaskFamily family_of(data::Task task) {
  switch (task) {
    case data::Task::SceneClassification:
      return TaskFamily::Classification;
    case data::Task::ReferringClassificationBox:
    case data::Task::ReferringClassificationPoint:
      return TaskFamily::ReferringClassification;
    default:
      return TaskFamily::Captioning;
  }
}

TaskFamily parse_family(const std::string& name) {
  for (auto f : {TaskFamily::Classification, TaskFamily::Captioning, TaskFamily::ReferringClassification}) {
    if (name == family_name(f)) return f;
  }
  try {
    return family_of(data::parse_task(name));
  } catch (const ValidationError&) {
    throw ValidationError("unknown task '" + name + "'");
  }
}

std::vector<TextEntry> read_text_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TextEntry> out;
  std::string line;
  for (std::size_t ln = 1; std::getline(in, line); ++ln) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(ln);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("text")) {
      throw ValidationError(where + ": expected an object with 'id' and 'text'");
    }
    TextEntry e;
    if (j["id"].is_string()) {
      e.id = j["id"].get<std::string>();
    } else if (j["id"].is_number_integer()) {
      e.id = j["id"].dump();
    } else {
      throw ValidationError(where + ": 'id' must be a string or an integer");
    }
    if (!j["text"].is_string()) throw ValidationError(where + ": 'text' must be a string");
    e.text = j["text"].get<std::string>();
    out.push_back(std::move(e));
  }
  if (out.empty()) throw ValidationError(path.filename().string() + ": no entries");
  return out;
}

void write_text_jsonl(const std::vector<TextEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["text"] = e.text;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::pair<int, std::string>> extract_labels(const std::string& text) {
  static const std::regex line_re(R"(^\s*<(?:Region|Mark) (\d{1,3})>:\s*(.*?)\s*$)");
  std::vector<std::pair<int, std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, line_re)) out.emplace_back(std::stoi(m[1].str()), m[2].str());
  }
  if (out.empty()) {
    const auto b = text.find_first_not_of(" \t\r\n");
    const auto e = text.find_last_not_of(" \t\r\n");
    out.emplace_back(1, b == std::string::npos ? std::string() : text.substr(b, e - b + 1));
  }
  return out;
}

std::optional<double> MetricReport::score(const std::string& name) const {
  for (const auto& [n, v] : scores) {
    if (n == name) return v;
  }
  throw ValidationError("report has no metric '" + name + "'");
}

std::vector<std::string> metric_names(TaskFamily family) {
  switch (family) {
    case TaskFamily::Classification:
      return {"accuracy"};
    case TaskFamily::Captioning:
      return {"BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "METEOR", "ROUGE-L", "CIDEr", "SPICE"};
    case TaskFamily::ReferringClassification:
      return {"SS", "S-IOU"};
  }
  throw ValidationError("unknown task family");
}

namespace {

std::string label_of(const std::vector<std::pair<int, std::string>>& labels, int mark) {
  for (const auto& [k, l] : labels) {
    if (k == mark) return l;
  }
  return {};
}

// One scored unit per (id, reference mark).
struct Unit {
  std::string candidate;
  std::vector<std::string> references;
};

std::vector<Unit> align(const std::vector<TextEntry>& predictions, const std::vector<TextEntry>& references,
                        bool multi_reference) {
  if (predictions.empty()) throw ValidationError("evaluate: empty prediction set");
  if (references.empty()) throw ValidationError("evaluate: empty reference set");
  std::map<std::string, std::vector<const TextEntry*>> refs;
  for (const auto& r : references) refs[r.id].push_back(&r);
  std::set<std::string> seen;
  std::vector<Unit> units;
  for (const auto& p : predictions) {
    if (!seen.insert(p.id).second) throw ValidationError("evaluate: duplicate prediction id '" + p.id + "'");
    auto it = refs.find(p.id);
    if (it == refs.end()) throw ValidationError("evaluate: prediction id '" + p.id + "' has no reference");
    if (!multi_reference && it->second.size() > 1) {
      throw ValidationError("evaluate: id '" + p.id + "' has several references");
    }
    const auto pred_labels = extract_labels(p.text);
    std::vector<std::vector<std::pair<int, std::string>>> ref_labels;
    for (const auto* r : it->second) ref_labels.push_back(extract_labels(r->text));
    std::set<int> marks;
    for (const auto& rl : ref_labels) {
      for (const auto& [k, _] : rl) marks.insert(k);
    }
    for (int k : marks) {
      Unit u;
      u.candidate = label_of(pred_labels, k);
      for (const auto& rl : ref_labels) {
        const std::string l = label_of(rl, k);
        if (!l.empty()) u.references.push_back(l);
      }
      if (u.references.empty()) throw ValidationError("evaluate: id '" + p.id + "' has an empty reference");
      units.push_back(std::move(u));
    }
  }
  for (const auto& [id, _] : refs) {
    if (!seen.count(id)) throw ValidationError("evaluate: reference id '" + id + "' has no prediction");
  }
  return units;
}

}  // namespace

MetricReport evaluate(TaskFamily family, const std::vector<TextEntry>& predictions,
                      const std::vector<TextEntry>& references) {
  const auto units = align(predictions, references, family == TaskFamily::Captioning);
  MetricReport report;
  report.task = family_name(family);
  report.corpus_size = units.size();
  switch (family) {
    case TaskFamily::Classification: {
      std::vector<std::string> preds, gts;
      for (const auto& u : units) {
        preds.push_back(u.candidate);
        gts.push_back(u.references.front());
      }
      report.scores.emplace_back("accuracy", accuracy(preds, gts));
      break;
    }
    case TaskFamily::Captioning: {
      std::vector<std::string> cands;
      References refs;
      for (const auto& u : units) {
        cands.push_back(u.candidate);
        refs.push_back(u.references);
      }
      for (int n = 1; n <= 4; ++n) report.scores.emplace_back("BLEU-" + std::to_string(n), bleu(cands, refs, n));
      report.scores.emplace_back("METEOR", meteor_simplified(cands, refs));
      report.scores.emplace_back("ROUGE-L", rouge_l(cands, refs));
      // Document frequencies are undefined on a single reference set.
      report.scores.emplace_back("CIDEr", refs.size() >= 2 ? std::optional<double>(cider(cands, refs)) : std::nullopt);
      report.scores.emplace_back("SPICE", std::nullopt);
      break;
    }
    case TaskFamily::ReferringClassification: {
      double ss = 0.0, iou = 0.0;
      for (const auto& u : units) {
        const std::string& gt = u.references.front();
        if (u.candidate.empty()) continue;
        ss += semantic_similarity(u.candidate, gt);
        iou += s_iou(u.candidate, gt);
      }
      const double n = static_cast<double>(units.size());
      report.scores.emplace_back("SS", ss / n);
      report.scores.emplace_back("S-IOU", iou / n);
      break;
    }
  }
  return report;
}

MetricReport evaluate_run(const std::filesystem::path& predictions, const std::filesystem::path& references,
                          const std::string& task) {
  const TaskFamily family = parse_family(task);
  return evaluate(family, read_text_jsonl(predictions), read_text_jsonl(references));
}

nlohmann::ordered_json to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["task"] = report.task;
  j["corpus_size"] = report.corpus_size;
  nlohmann::ordered_json scores = nlohmann::ordered_json::object();
  for (const auto& [name, v] : report.scores) {
    if (v) {
      scores[name] = *v;
    } else {
      scores[name] = "n/a";
    }
  }
  j["scores"] = scores;
  return j;
}

std::string format_table(const MetricReport& report) {
  std::vector<std::string> header, values;
  for (const auto& [name, v] : report.scores) {
    header.push_back(name);
    if (v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", *v);
      values.emplace_back(buf);
    } else {
      values.emplace_back("n/a");
    }
  }
  std::string top, bottom;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::size_t w = std::max(header[i].size(), values[i].size());
    const std::string sep = i + 1 < header.size() ? "  " : "";
    top += header[i] + std::string(w - header[i].size(), ' ') + sep;
    bottom += std::string(w - values[i].size(), ' ') + values[i] + sep;
  }
  while (!top.empty() && top.back() == ' ') top.pop_back();
  return report.task + " (n = " + std::to_string(report.corpus_size) + ")\n" + top + "\n" + bottom + "\n";
}

}  // namespace vprompt::metrics
