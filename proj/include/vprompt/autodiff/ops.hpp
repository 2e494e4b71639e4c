// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "vprompt/autodiff/tensor.hpp"

namespace vprompt::ad {

// The closed op set. Every op validates shapes (ShapeError naming the op and
// the offending shapes) and records a backward rule when any input requires
// grad.

/// (m,k) x (k,n) -> (m,n).
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise add. When ranks differ, the lower-rank operand must equal the
/// trailing axes of the other and is broadcast over the leading axes.
Tensor add(const Tensor& a, const Tensor& b);

/// Elementwise multiply with the same broadcast rule as add().
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Softmax over the last axis. Inputs must be finite.
Tensor softmax(const Tensor& a);

/// Layer normalization over the last axis with affine gain and bias of shape
/// (last_dim).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Exact (erf) GELU.
Tensor gelu(const Tensor& a);

/// Average pooling of an (H, W, C) tensor with window = stride = factor.
Tensor avg_pool2d(const Tensor& x, std::size_t factor);

/// Row gather: table (V, D), ids -> (ids.size(), D).
Tensor embedding(const Tensor& table, std::span<const int> ids);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);

Tensor reshape(const Tensor& a, Shape shape);

/// Swaps the last two axes.
Tensor transpose(const Tensor& a);

/// Mean cross-entropy over the rows of (N, V) logits (a rank-1
/// input is treated as one row). Rows whose target is negative are ignored.
/// Throws ValidationError if every row is ignored.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

/// Patch extraction of an (H, W, C) tensor for convolution-as-matmul:
/// returns (Ho*Wo, kernel*kernel*C) with zero padding, rows in raster order
/// and columns ordered (ky, kx, c).
Tensor im2col(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t pad);

// Composites built only from the ops above.

/// x (T, in) times W^T with W stored (out, in), plus an optional bias (out).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

namespace debug {
/// Injects a wrong backward rule for the named op ("gelu", "matmul", ...).
/// Test fixture for negative-control gradient checks; pass "" to clear.
void set_corrupted_backward(const std::string& op);
const std::string& corrupted_backward();
}  // namespace debug

}  // namespace vprompt::ad
