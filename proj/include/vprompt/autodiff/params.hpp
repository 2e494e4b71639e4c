// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "vprompt/autodiff/tensor.hpp"

namespace vprompt::ad {

using ParamId = std::uint32_t;

struct Parameter {
  ParamId id;
  std::string name;  // dotted path, e.g. "decoder.layer0.head1.wq"
  Tensor value;
};

/// Owns every trainable tensor of a model. Ids are assigned in registration
/// order, so a model built from the same config always gets the same ids.
class ParameterStore {
 public:
  Tensor create(std::string name, Shape shape, std::vector<double> values);

  const std::vector<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  const Parameter& at(ParamId id) const;
  const Parameter* find(const std::string& name) const;

  std::set<ParamId> ids() const;
  std::set<ParamId> select(const std::function<bool(const std::string&)>& pred) const;

  /// Marks exactly `ids` as requiring grad and drops every stored grad.
  void set_trainable(const std::set<ParamId>& ids);
  std::set<ParamId> trainable() const;
  void zero_grads();
  void clear_grads();

  std::size_t scalar_count() const;

 private:
  std::vector<Parameter> params_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  ParamId id;
  std::string name;
  Shape shape;
  std::vector<double> data;
};

/// Binary container: magic "VPCKPT\0\0", u32 version, u32 count, then per
/// entry u32 id, u32 name length, name bytes, u32 rank, u64 dims, f64 values.
/// Every integer and float is little-endian.
void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);
/// Copies values into `store`; every id must exist with the same name and shape.
void load_checkpoint(ParameterStore& store, const std::filesystem::path& path);

/// Names of parameters whose raw bits differ between two checkpoints.
std::vector<std::string> checkpoint_diff(const std::vector<CheckpointEntry>& before,
                                         const std::vector<CheckpointEntry>& after);

/// Shell-style match supporting '*' (any run) and '?' (one char).
bool glob_match(std::string_view pattern, std::string_view text);

}  // namespace vprompt::ad
