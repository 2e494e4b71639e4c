// SPDX-License-Identifier: Apache-2.0
#include "vprompt/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vprompt/core/errors.hpp"

namespace vprompt::ad {

namespace {

std::string& corrupted_op() {
  static std::string op;
  return op;
}

Tensor make_result(Shape shape, std::vector<double> data, const char* op, std::vector<NodePtr> parents,
                   std::function<void(Node&)> rule) {
  Tensor out(std::move(shape), std::move(data));
  const bool tracked = std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
  Node& node = *out.node();
  node.op = op;
  if (tracked) {
    node.requires_grad = true;
    node.parents = std::move(parents);
    if (corrupted_op() == op) {
      node.backward = [rule = std::move(rule)](Node& self) {
        for (auto& g : self.grad) g *= 1.25;
        rule(self);
      };
    } else {
      node.backward = std::move(rule);
    }
  }
  return out;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_finite(const char* op, std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

std::size_t last_dim(const Tensor& t) { return t.shape().back(); }

// Resolves the leading-axis broadcast between a and b. Returns true when a is
// the full-shape operand.
bool broadcast_roles(const char* op, const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return true;
  const bool a_big = sa.size() > sb.size();
  const Shape& big = a_big ? sa : sb;
  const Shape& small = a_big ? sb : sa;
  if (big.size() == small.size() || !std::equal(small.begin(), small.end(), big.end() - small.size())) {
    shape_mismatch(op, sa, sb);
  }
  return a_big;
}

void accumulate(const NodePtr& node, std::span<const double> contrib) {
  if (!node->requires_grad) return;
  auto& g = node->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += contrib[i];
}

}  // namespace

namespace debug {
void set_corrupted_backward(const std::string& op) { corrupted_op() = op; }
const std::string& corrupted_backward() { return corrupted_op(); }
}  // namespace debug

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), "matmul", {a.node(), b.node()}, [m, k, n](Node& self) {
    const auto& G = self.grad;
    const Node& na = *self.parents[0];
    const Node& nb = *self.parents[1];
    if (na.requires_grad) {
      auto& ga = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * nb.data[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      auto& gb = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = na.data[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool a_big = broadcast_roles("add", a, b);
  const Tensor& big = a_big ? a : b;
  const Tensor& small = a_big ? b : a;
  const std::size_t n = small.size();
  std::vector<double> out(big.data().begin(), big.data().end());
  auto S = small.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += S[i % n];
  return make_result(big.shape(), std::move(out), "add", {big.node(), small.node()}, [n](Node& self) {
    accumulate(self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) {
      auto& gs = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) gs[i % n] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const bool a_big = broadcast_roles("mul", a, b);
  const Tensor& big = a_big ? a : b;
  const Tensor& small = a_big ? b : a;
  const std::size_t n = small.size();
  auto B = big.data();
  auto S = small.data();
  std::vector<double> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = B[i] * S[i % n];
  return make_result(big.shape(), std::move(out), "mul", {big.node(), small.node()}, [n](Node& self) {
    const Node& nb = *self.parents[0];
    const Node& ns = *self.parents[1];
    if (nb.requires_grad) {
      auto& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * ns.data[i % n];
    }
    if (ns.requires_grad) {
      auto& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i] * nb.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), "scale", {a.node()}, [factor](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result({1}, {total}, "sum", {a.node()}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor softmax(const Tensor& a) {
  require_finite("softmax", a.data());
  const std::size_t d = last_dim(a);
  const std::size_t rows = a.size() / d;
  auto X = a.data();
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = X.data() + r * d;
    double* y = out.data() + r * d;
    const double mx = *std::max_element(x, x + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < d; ++j) y[j] /= z;
  }
  return make_result(a.shape(), std::move(out), "softmax", {a.node()}, [d, rows](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * d;
      const double* gy = self.grad.data() + r * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) g[r * d + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = last_dim(x);
  if (gain.shape() != Shape{d}) shape_mismatch("layer_norm", x.shape(), gain.shape());
  if (bias.shape() != Shape{d}) shape_mismatch("layer_norm", x.shape(), bias.shape());
  const std::size_t rows = x.size() / d;
  auto X = x.data();
  auto Gm = gain.data();
  auto Bt = bias.data();
  std::vector<double> xhat(x.size()), rstd(rows), out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t i = r * d + j;
      xhat[i] = (xr[j] - mu) * rstd[r];
      out[i] = xhat[i] * Gm[j] + Bt[j];
    }
  }
  return make_result(x.shape(), std::move(out), "layer_norm", {x.node(), gain.node(), bias.node()},
                     [d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
                       const auto& G = self.grad;
                       const Node& ngain = *self.parents[1];
                       if (self.parents[1]->requires_grad) {
                         auto& gg = self.parents[1]->grad_buffer();
                         for (std::size_t i = 0; i < G.size(); ++i) gg[i % d] += G[i] * xhat[i];
                       }
                       if (self.parents[2]->requires_grad) {
                         auto& gb = self.parents[2]->grad_buffer();
                         for (std::size_t i = 0; i < G.size(); ++i) gb[i % d] += G[i];
                       }
                       if (self.parents[0]->requires_grad) {
                         auto& gx = self.parents[0]->grad_buffer();
                         std::vector<double> dxhat(d);
                         for (std::size_t r = 0; r < rows; ++r) {
                           double m1 = 0.0, m2 = 0.0;
                           for (std::size_t j = 0; j < d; ++j) {
                             const std::size_t i = r * d + j;
                             dxhat[j] = G[i] * ngain.data[j];
                             m1 += dxhat[j];
                             m2 += dxhat[j] * xhat[i];
                           }
                           m1 /= static_cast<double>(d);
                           m2 /= static_cast<double>(d);
                           for (std::size_t j = 0; j < d; ++j) {
                             const std::size_t i = r * d + j;
                             gx[i] += rstd[r] * (dxhat[j] - m1 - xhat[i] * m2);
                           }
                         }
                       }
                     });
}

Tensor gelu(const Tensor& a) {
  auto X = a.data();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * X[i] * (1.0 + std::erf(X[i] / std::numbers::sqrt2));
  return make_result(a.shape(), std::move(out), "gelu", {a.node()}, [](Node& self) {
    const Node& in = *self.parents[0];
    auto& g = self.parents[0]->grad_buffer();
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = in.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
      g[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

Tensor avg_pool2d(const Tensor& x, std::size_t factor) {
  if (factor == 0) throw ValidationError("avg_pool2d: factor must be >= 1");
  if (x.rank() != 3) throw ShapeError("avg_pool2d: expected (H,W,C), got " + shape_str(x.shape()));
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  if (H % factor != 0 || W % factor != 0) {
    throw ShapeError("avg_pool2d: factor " + std::to_string(factor) + " does not divide " + shape_str(x.shape()));
  }
  const std::size_t Ho = H / factor, Wo = W / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  auto X = x.data();
  std::vector<double> out(Ho * Wo * C, 0.0);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t xx = 0; xx < W; ++xx) {
      const double* src = X.data() + (y * W + xx) * C;
      double* dst = out.data() + ((y / factor) * Wo + xx / factor) * C;
      for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
    }
  }
  for (auto& v : out) v *= inv;
  return make_result({Ho, Wo, C}, std::move(out), "avg_pool2d", {x.node()}, [=](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t xx = 0; xx < W; ++xx) {
        const double* src = self.grad.data() + ((y / factor) * Wo + xx / factor) * C;
        double* dst = g.data() + (y * W + xx) * C;
        for (std::size_t c = 0; c < C; ++c) dst[c] += src[c] * inv;
      }
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) throw ShapeError("embedding: table must be (V,D), got " + shape_str(table.shape()));
  if (ids.empty()) throw ShapeError("embedding: empty id list");
  const std::size_t V = table.dim(0), D = table.dim(1);
  std::vector<int> idv(ids.begin(), ids.end());
  std::vector<double> out(idv.size() * D);
  auto T = table.data();
  for (std::size_t r = 0; r < idv.size(); ++r) {
    if (idv[r] < 0 || static_cast<std::size_t>(idv[r]) >= V) {
      throw ShapeError("embedding: id " + std::to_string(idv[r]) + " out of range for table " +
                       shape_str(table.shape()));
    }
    std::copy_n(T.data() + idv[r] * D, D, out.data() + r * D);
  }
  const std::size_t rows = idv.size();
  return make_result({rows, D}, std::move(out), "embedding", {table.node()}, [D, idv = std::move(idv)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < idv.size(); ++r) {
      for (std::size_t j = 0; j < D; ++j) g[idv[r] * D + j] += self.grad[r * D + j];
    }
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size())
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(ref));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != ref.size()) shape_mismatch("concat", ref, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != ref[i]) shape_mismatch("concat", ref, s);
    }
    widths.push_back(s[axis] * inner);
    total += s[axis];
    parents.push_back(p.node());
  }
  const std::size_t row = total * inner;
  std::vector<double> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.data() + o * widths[k], widths[k], out.data() + o * row + offset);
    }
    offset += widths[k];
  }
  Shape shape = ref;
  shape[axis] = total;
  return make_result(std::move(shape), std::move(out), "concat", std::move(parents), [outer, row, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (self.parents[k]->requires_grad) {
        auto& g = self.parents[k]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = self.grad.data() + o * row + off;
          double* dst = g.data() + o * widths[k];
          for (std::size_t j = 0; j < widths[k]; ++j) dst[j] += src[j];
        }
      }
      off += widths[k];
    }
  });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) shape_mismatch("reshape", a.shape(), shape);
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {a.node()},
                     [](Node& self) { accumulate(self.parents[0], self.grad); });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose: need rank >= 2, got " + shape_str(a.shape()));
  const std::size_t r = a.dim(a.rank() - 2), c = a.dim(a.rank() - 1);
  const std::size_t batch = a.size() / (r * c);
  auto X = a.data();
  std::vector<double> out(a.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) out[b * r * c + j * r + i] = X[b * r * c + i * c + j];
    }
  }
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  return make_result(std::move(shape), std::move(out), "transpose", {a.node()}, [batch, r, c](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[b * r * c + i * c + j] += self.grad[b * r * c + j * r + i];
      }
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw ShapeError("cross_entropy: expected (N,V) logits, got " + shape_str(logits.shape()));
  }
  const std::size_t V = last_dim(logits);
  const std::size_t N = logits.size() / V;
  if (targets.size() != N) {
    throw ShapeError("cross_entropy: shape mismatch " + shape_str(logits.shape()) + " vs targets (" +
                     std::to_string(targets.size()) + ")");
  }
  require_finite("cross_entropy", logits.data());
  auto X = logits.data();
  std::vector<int> tv(targets.begin(), targets.end());
  std::vector<double> probs(logits.size(), 0.0);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < N; ++r) {
    if (tv[r] < 0) continue;
    if (static_cast<std::size_t>(tv[r]) >= V) {
      throw ShapeError("cross_entropy: target " + std::to_string(tv[r]) + " out of range for " + std::to_string(V) +
                       " classes");
    }
    const double* x = X.data() + r * V;
    const double mx = *std::max_element(x, x + V);
    double z = 0.0;
    for (std::size_t j = 0; j < V; ++j) z += (probs[r * V + j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < V; ++j) probs[r * V + j] /= z;
    total += (mx + std::log(z)) - x[tv[r]];
    ++count;
  }
  if (count == 0) throw ValidationError("cross_entropy: every target is ignored");
  const double inv = 1.0 / static_cast<double>(count);
  return make_result({1}, {total * inv}, "cross_entropy", {logits.node()},
                     [V, N, inv, tv = std::move(tv), probs = std::move(probs)](Node& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       const double up = self.grad[0] * inv;
                       for (std::size_t r = 0; r < N; ++r) {
                         if (tv[r] < 0) continue;
                         for (std::size_t j = 0; j < V; ++j) g[r * V + j] += up * probs[r * V + j];
                         g[r * V + tv[r]] -= up;
                       }
                     });
}

Tensor im2col(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (x.rank() != 3) throw ShapeError("im2col: expected (H,W,C), got " + shape_str(x.shape()));
  if (kernel == 0 || stride == 0) throw ValidationError("im2col: kernel and stride must be >= 1");
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  if (H + 2 * pad < kernel || W + 2 * pad < kernel) {
    throw ShapeError("im2col: kernel " + std::to_string(kernel) + " larger than padded input " + shape_str(x.shape()));
  }
  const std::size_t Ho = (H + 2 * pad - kernel) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kernel) / stride + 1;
  const std::size_t cols = kernel * kernel * C;
  // Source index per output cell, -1 for padding.
  std::vector<long> index(Ho * Wo * cols, -1);
  for (std::size_t oy = 0; oy < Ho; ++oy) {
    for (std::size_t ox = 0; ox < Wo; ++ox) {
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        for (std::size_t kx = 0; kx < kernel; ++kx) {
          const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
          const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
          if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
          for (std::size_t c = 0; c < C; ++c) {
            index[(oy * Wo + ox) * cols + (ky * kernel + kx) * C + c] =
                (iy * static_cast<long>(W) + ix) * static_cast<long>(C) + static_cast<long>(c);
          }
        }
      }
    }
  }
  auto X = x.data();
  std::vector<double> out(index.size(), 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= 0) out[i] = X[index[i]];
  }
  return make_result({Ho * Wo, cols}, std::move(out), "im2col", {x.node()}, [index = std::move(index)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index[i] >= 0) g[index[i]] += self.grad[i];
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || x.rank() != 2 || x.dim(1) != weight.dim(1))
    shape_mismatch("linear", x.shape(), weight.shape());
  Tensor y = matmul(x, transpose(weight));
  return bias.defined() ? add(y, bias) : y;
}

}  // namespace vprompt::ad
