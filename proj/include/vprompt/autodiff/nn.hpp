// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <vector>

#include "vprompt/autodiff/tensor.hpp"

namespace vprompt::ad {

/// softmax(Q K^T / sqrt(key_dim)) V, row-wise. With `causal`, row t only sees
/// columns <= t. Q is (Tq, d), K is (Tk, d), V is (Tk, dv).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t key_dim, bool causal);

/// Additive mask: 0 on and below the diagonal, -1e30 above it.
Tensor causal_mask(std::size_t rows, std::size_t cols);

/// Fixed sinusoidal position table (T, width).
Tensor sinusoidal_positions(std::size_t length, std::size_t width);

std::vector<double> normal_values(std::size_t n, double stddev, std::mt19937_64& rng);

}  // namespace vprompt::ad
