// SPDX-License-Identifier: Apache-2.0
#include "vprompt/autodiff/nn.hpp"

#include <cmath>

#include "vprompt/autodiff/ops.hpp"
#include "vprompt/core/errors.hpp"

namespace vprompt::ad {

Tensor causal_mask(std::size_t rows, std::size_t cols) {
  std::vector<double> m(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = i + 1; j < cols; ++j) m[i * cols + j] = -1e30;
  }
  return Tensor({rows, cols}, std::move(m));
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t key_dim, bool causal) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0)) {
    throw ShapeError("attention: shape mismatch q" + shape_str(q.shape()) + " k" + shape_str(k.shape()) + " v" +
                     shape_str(v.shape()));
  }
  if (key_dim == 0) throw ValidationError("attention: key_dim must be >= 1");
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(key_dim)));
  if (causal) scores = add(scores, causal_mask(q.dim(0), k.dim(0)));
  return matmul(softmax(scores), v);
}

Tensor sinusoidal_positions(std::size_t length, std::size_t width) {
  std::vector<double> table(length * width);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < width; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) * rate;
      table[pos * width + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor({length, width}, std::move(table));
}

std::vector<double> normal_values(std::size_t n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace vprompt::ad
