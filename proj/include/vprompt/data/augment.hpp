// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "vprompt/data/record.hpp"

namespace vprompt::data {

/// Labelled region handed to a text generator.
struct RegionInfo {
  int mark = 0;
  std::array<int, 4> box{};
  std::string label;
};

/// Text-generation backend used to produce relationship and detailed
/// region-caption answers. Implementations throw to reject a record.
class Augmenter {
 public:
  virtual ~Augmenter() = default;
  virtual std::string generate(Task target, const std::vector<RegionInfo>& regions, int width, int height) = 0;
};

/// Offline generator that composes sentences from labels and box geometry.
class StubAugmenter : public Augmenter {
 public:
  std::string generate(Task target, const std::vector<RegionInfo>& regions, int width, int height) override;
};

/// "to the left of", "to the right of", "above" or "below", chosen by the
/// dominant axis of the center offset from `a` to `b` (ties go horizontal).
std::string spatial_relation(const std::array<int, 4>& a, const std::array<int, 4>& b);

struct AugmentResult {
  std::vector<InstructionRecord> records;
  std::vector<std::string> errors;  // one entry per rejected (record, target)
};

/// For every box-prompted templated record, asks the augmenter for one answer
/// per target task (Relationship, GroundedCaption). Other records are skipped.
/// Failures are collected and do not stop the run.
AugmentResult augment_captions(const std::vector<InstructionRecord>& records, Augmenter& augmenter,
                               const std::vector<Task>& targets = {Task::Relationship, Task::GroundedCaption});

}  // namespace vprompt::data
