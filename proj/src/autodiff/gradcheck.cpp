// SPDX-License-Identifier: Apache-2.0
#include "vprompt/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vprompt/core/errors.hpp"

namespace vprompt::ad {

GradCheckResult finite_diff_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                                  const GradCheckOptions& options) {
  if (!(options.eps > 0.0) || !std::isfinite(options.eps)) throw ValidationError("finite_diff_check: eps must be > 0");
  if (!(options.denominator_floor > 0.0)) throw ValidationError("finite_diff_check: denominator_floor must be > 0");

  std::vector<bool> saved_flags;
  for (auto& p : params) {
    saved_flags.push_back(p.requires_grad());
    p.set_requires_grad(true);
    p.clear_grad();
  }

  Tensor loss = f();
  if (loss.size() != 1) throw ShapeError("finite_diff_check: f must return a scalar, got " + shape_str(loss.shape()));
  if (loss.requires_grad()) backward(loss);

  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), 0.0);
    }
  }

  // Numeric probes need no tape.
  for (auto& p : params) p.set_requires_grad(false);
  auto eval = [&]() { return f().item(); };

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor != 0 && coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto values = p.mutable_data();
    for (auto i : coords) {
      const double original = values[i];
      values[i] = original + options.eps;
      const double up = eval();
      values[i] = original - options.eps;
      const double down = eval();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max(options.denominator_floor, std::abs(a) + std::abs(numeric));
      ++result.coords_checked;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        result.worst_tensor = t;
        result.worst_coord = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }

  for (std::size_t t = 0; t < params.size(); ++t) {
    params[t].clear_grad();
    params[t].set_requires_grad(saved_flags[t]);
  }
  return result;
}

}  // namespace vprompt::ad
