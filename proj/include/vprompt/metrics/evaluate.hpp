// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vprompt/data/record.hpp"

namespace vprompt::metrics {

enum class TaskFamily { Classification, Captioning, ReferringClassification };

const char* family_name(TaskFamily family);
TaskFamily family_of(data::Task task);
/// Accepts a family name ("classification", "captioning",
/// "referring_classification") or any record task name.
TaskFamily parse_family(const std::string& name);

/// One line of a prediction or reference file.
struct TextEntry {
  std::string id;
  std::string text;
};

std::vector<TextEntry> read_text_jsonl(const std::filesystem::path& path);
void write_text_jsonl(const std::vector<TextEntry>& entries, const std::filesystem::path& path);

/// Per-mark labels of a templated answer, read leniently: every line of the
/// form "<Tag k>: label" counts, anything else is ignored. Text without such
/// lines is taken as the label of mark 1.
std::vector<std::pair<int, std::string>> extract_labels(const std::string& text);

struct MetricReport {
  std::string task;
  std::size_t corpus_size = 0;  // number of scored units (labels or captions)
  /// In table order; std::nullopt is printed as "n/a".
  std::vector<std::pair<std::string, std::optional<double>>> scores;

  std::optional<double> score(const std::string& name) const;
};

/// Metric column order of each family.
std::vector<std::string> metric_names(TaskFamily family);

/// Predictions must carry unique ids; references may repeat an id to give
/// several references. The two id sets must be equal.
MetricReport evaluate(TaskFamily family, const std::vector<TextEntry>& predictions,
                      const std::vector<TextEntry>& references);
MetricReport evaluate_run(const std::filesystem::path& predictions, const std::filesystem::path& references,
                          const std::string& task);

nlohmann::ordered_json to_json(const MetricReport& report);
/// Aligned columns: a header row of metric names and a row of scores.
std::string format_table(const MetricReport& report);

}  // namespace vprompt::metrics
