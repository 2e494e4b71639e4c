// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "vprompt/autodiff/tensor.hpp"
#include "vprompt/fusion/model.hpp"

namespace vprompt::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one invocation; `args` excludes the program name. Machine-readable
/// JSON goes to `out`, human-readable text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct GradcheckOptions {
  fusion::ModelConfig model;
  double eps = 1e-4;
  std::size_t coords_per_tensor = 3;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double denominator_floor = 1e-6;
  /// Applied to the loss before differentiation; lets tests inject a broken
  /// backward rule.
  std::function<ad::Tensor(const ad::Tensor&)> loss_hook;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t tensors = 0;
  std::string worst_param;
  double seconds = 0.0;
  bool passed = false;
};

/// Builds a toy model with non-zero LoRA factors, one box-prompted record on a
/// synthetic scene, and compares backward() with central differences through
/// rasterization, the visual encoder, the projection, the decoder and the
/// masked cross-entropy.
GradcheckReport end_to_end_gradcheck(const GradcheckOptions& options);

}  // namespace vprompt::cli
