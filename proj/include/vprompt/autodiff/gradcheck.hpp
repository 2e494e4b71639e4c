// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>

#include "vprompt/autodiff/tensor.hpp"

namespace vprompt::ad {

struct GradCheckOptions {
  double eps = 1e-5;
  /// Upper bound on coordinates probed per tensor; 0 probes every coordinate.
  /// Probed coordinates are drawn without replacement from `seed`.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Lower bound of the error denominator. Gradients that are exactly zero
  /// (e.g. attention key biases) leave only rounding noise in both estimates.
  double denominator_floor = 1e-8;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares backward() against central differences. `f` must rebuild the
/// forward graph from the current values of `params` on every call. The
/// per-coordinate error is |analytic - numeric| / max(floor, |analytic| + |numeric|).
GradCheckResult finite_diff_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                                  const GradCheckOptions& options = {});

}  // namespace vprompt::ad
