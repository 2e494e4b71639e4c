// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "vprompt/autodiff/gradcheck.hpp"
#include "vprompt/autodiff/ops.hpp"
#include "vprompt/autodiff/params.hpp"
#include "vprompt/core/errors.hpp"

using namespace vprompt;
using namespace vprompt::ad;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true) {
  auto n = numel(shape);
  return Tensor(std::move(shape), random_values(n, rng), requires_grad);
}

// sum(t * w) with a fixed random w, so every output coordinate gets a
// distinct upstream gradient.
Tensor readout(const Tensor& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w(t.shape(), random_values(t.size(), rng), false);
  return sum(mul(t, w));
}

double check(const std::function<Tensor()>& f, std::vector<Tensor> params) {
  return finite_diff_check(f, params, {.eps = 1e-5}).max_rel_error;
}

Shape random_shape(std::mt19937_64& rng, std::size_t rank) {
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  Shape s(rank);
  for (auto& d : s) d = dim(rng);
  return s;
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  auto y = softmax(Tensor({2}, {0.0, 0.0}));
  CHECK(y.data()[0] == doctest::Approx(0.5));
  CHECK(y.data()[1] == doctest::Approx(0.5));
}

TEST_CASE("identity matmul returns the other operand") {
  std::mt19937_64 rng(1);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto a = random_tensor({3, 3}, rng, false);
  auto out = matmul(eye, a);
  for (std::size_t i = 0; i < 9; ++i) CHECK(out.data()[i] == a.data()[i]);
}

TEST_CASE("concat along the channel axis") {
  auto out = concat({Tensor::zeros({4, 4, 3}), Tensor::full({4, 4, 5}, 1.0)}, 2);
  CHECK(out.shape() == Shape{4, 4, 8});
  CHECK(out.data()[2] == 0.0);
  CHECK(out.data()[3] == 1.0);
  CHECK(out.data()[8] == 0.0);
}

TEST_CASE("shape errors name the op and both shapes") {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()) == "matmul: shape mismatch (2,3) vs (4,5)");
  }
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
  CHECK_THROWS_AS(concat({Tensor::zeros({2, 3}), Tensor::zeros({3, 2})}, 1), ShapeError);
  CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {4}), ShapeError);
  CHECK_THROWS_AS(avg_pool2d(Tensor::zeros({3, 3, 1}), 2), ShapeError);
}

TEST_CASE("non-finite inputs are rejected") {
  CHECK_THROWS_AS(softmax(Tensor({2}, {0.0, NAN})), NumericError);
  const int target = 0;
  CHECK_THROWS_AS(cross_entropy(Tensor({2}, {INFINITY, 0.0}), std::span(&target, 1)), NumericError);
}

TEST_CASE("backward of sum(x*x) is 2x") {
  Tensor x({1}, {3.0}, true);
  backward(sum(mul(x, x)));
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward leaves unreachable parameters untouched") {
  Tensor x({2}, {1.0, 2.0}, true);
  Tensor p({2}, {5.0, 6.0}, true);
  p.mutable_grad()[0] = 0.25;
  backward(sum(mul(x, x)));
  CHECK(p.grad()[0] == 0.25);
  CHECK(p.grad()[1] == 0.0);
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tensor x({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(scale(x, 2.0)), ShapeError);
}

TEST_CASE("cross-entropy gradient is p - y") {
  Tensor logits({2}, {0.0, 0.0}, true);
  const int target = 0;
  auto loss = cross_entropy(logits, std::span(&target, 1));
  CHECK(loss.item() == doctest::Approx(std::log(2.0)));
  backward(loss);
  CHECK(logits.grad()[0] == doctest::Approx(-0.5));
  CHECK(logits.grad()[1] == doctest::Approx(0.5));
}

TEST_CASE("finite_diff_check on a quadratic") {
  Tensor x({3}, {0.3, -1.2, 2.0}, true);
  std::vector<Tensor> params{x};
  auto result = finite_diff_check([&] { return sum(mul(x, x)); }, params, {.eps = 1e-5});
  CHECK(result.max_rel_error <= 1e-6);
  CHECK(result.coords_checked == 3);
}

TEST_CASE("finite_diff_check on a constant") {
  Tensor x({2}, {1.0, 2.0}, true);
  std::vector<Tensor> params{x};
  auto result = finite_diff_check([] { return Tensor::scalar(4.0); }, params, {.eps = 1e-5});
  CHECK(result.max_rel_error == 0.0);
  CHECK_THROWS_AS(finite_diff_check([] { return Tensor::scalar(4.0); }, params, {.eps = 0.0}), ValidationError);
}

TEST_CASE("every core op matches central differences on random shapes") {
  std::mt19937_64 rng(7);
  std::uint64_t s = 100;
  auto trials = [&](const std::function<void()>& body) {
    for (int trial = 0; trial < 5; ++trial, ++s) body();
  };
  {
    SUBCASE("matmul") {
      trials([&] {
        std::uniform_int_distribution<std::size_t> dim(1, 4);
        auto a = random_tensor({dim(rng), dim(rng)}, rng);
        auto b = random_tensor({a.dim(1), dim(rng)}, rng);
        CHECK(check([&] { return readout(matmul(a, b), s); }, {a, b}) <= 1e-4);
      });
    }
    SUBCASE("add and mul broadcast") {
      trials([&] {
        auto a = random_tensor(random_shape(rng, 3), rng);
        auto b = random_tensor({a.dim(1), a.dim(2)}, rng);
        CHECK(check([&] { return readout(add(a, b), s); }, {a, b}) <= 1e-4);
        CHECK(check([&] { return readout(mul(b, a), s); }, {a, b}) <= 1e-4);
      });
    }
    SUBCASE("softmax") {
      trials([&] {
        auto a = random_tensor(random_shape(rng, 2), rng);
        CHECK(check([&] { return readout(softmax(a), s); }, {a}) <= 1e-4);
      });
    }
    SUBCASE("layer_norm") {
      trials([&] {
        auto x = random_tensor({3, 4}, rng);
        auto g = random_tensor({4}, rng);
        auto b = random_tensor({4}, rng);
        CHECK(check([&] { return readout(layer_norm(x, g, b), s); }, {x, g, b}) <= 1e-4);
      });
    }
    SUBCASE("gelu") {
      trials([&] {
        auto a = random_tensor(random_shape(rng, 2), rng);
        CHECK(check([&] { return readout(gelu(a), s); }, {a}) <= 1e-4);
      });
    }
    SUBCASE("avg_pool2d") {
      trials([&] {
        auto x = random_tensor({4, 4, 2}, rng);
        CHECK(check([&] { return readout(avg_pool2d(x, 2), s); }, {x}) <= 1e-4);
      });
    }
    SUBCASE("embedding") {
      trials([&] {
        auto table = random_tensor({5, 3}, rng);
        std::vector<int> ids{4, 0, 4, 2};
        CHECK(check([&] { return readout(embedding(table, ids), s); }, {table}) <= 1e-4);
      });
    }
    SUBCASE("concat") {
      trials([&] {
        auto a = random_tensor({2, 3, 2}, rng);
        auto b = random_tensor({2, 1, 2}, rng);
        CHECK(check([&] { return readout(concat({a, b}, 1), s); }, {a, b}) <= 1e-4);
      });
    }
    SUBCASE("reshape and transpose") {
      trials([&] {
        auto a = random_tensor({2, 3, 4}, rng);
        CHECK(check([&] { return readout(transpose(reshape(a, {6, 4})), s); }, {a}) <= 1e-4);
      });
    }
    SUBCASE("cross_entropy") {
      trials([&] {
        auto logits = random_tensor({4, 5}, rng);
        std::vector<int> targets{1, -1, 4, 0};
        CHECK(check([&] { return cross_entropy(logits, targets); }, {logits}) <= 1e-4);
      });
    }
    SUBCASE("im2col") {
      trials([&] {
        auto x = random_tensor({5, 4, 2}, rng);
        CHECK(check([&] { return readout(im2col(x, 3, 2, 1), s); }, {x}) <= 1e-4);
      });
    }
    SUBCASE("scale sum mean") {
      trials([&] {
        auto a = random_tensor({3, 2}, rng);
        CHECK(check([&] { return mean(scale(mul(a, a), -0.7)); }, {a}) <= 1e-4);
      });
    }
  }
}

TEST_CASE("broadcast add agrees with explicit tiling") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> rank_dist(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rank = rank_dist(rng);
    const Shape big = random_shape(rng, rank);
    std::uniform_int_distribution<std::size_t> suffix_dist(0, rank);
    const auto keep = suffix_dist(rng);
    Shape small(big.end() - static_cast<long>(keep), big.end());
    if (small.empty()) small = {big.back()};
    if (small.size() > big.size() || !std::equal(small.begin(), small.end(), big.end() - small.size())) continue;
    auto a = random_tensor(big, rng, false);
    auto b = random_tensor(small, rng, false);
    auto out = add(a, b);
    auto out_swapped = add(b, a);
    CHECK(out.shape() == big);
    // Tile b explicitly across the leading axes.
    std::vector<double> tiled;
    while (tiled.size() < a.size()) tiled.insert(tiled.end(), b.data().begin(), b.data().end());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(out.data()[i] == a.data()[i] + tiled[i]);
      CHECK(out_swapped.data()[i] == out.data()[i]);
    }
  }
}

TEST_CASE("forward is deterministic") {
  auto run = [] {
    std::mt19937_64 rng(5);
    auto x = random_tensor({4, 6}, rng);
    auto w = random_tensor({6, 6}, rng);
    auto g = Tensor::full({6}, 1.0);
    auto b = Tensor::zeros({6});
    return softmax(gelu(layer_norm(matmul(x, w), g, b)));
  };
  auto a = run();
  auto b = run();
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("corrupted backward rule is caught by the gradient check") {
  std::mt19937_64 rng(3);
  auto a = random_tensor({3, 3}, rng);
  debug::set_corrupted_backward("gelu");
  const double err = check([&] { return readout(gelu(a), 9); }, {a});
  debug::set_corrupted_backward("");
  CHECK(err > 1e-2);
}

TEST_CASE("checkpoint round trip and diff") {
  ParameterStore store;
  auto w = store.create("layer.w", {2, 2}, {1.0, -2.0, 3.5, 0.0});
  store.create("layer.b", {2}, {0.5, 0.25});
  const auto dir = std::filesystem::temp_directory_path() / "vprompt_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(store, dir / "a.ckpt");
  w.mutable_data()[1] = 7.0;
  save_checkpoint(store, dir / "b.ckpt");

  auto before = read_checkpoint(dir / "a.ckpt");
  REQUIRE(before.size() == 2);
  CHECK(before[0].name == "layer.w");
  CHECK(before[0].shape == Shape{2, 2});
  CHECK(before[0].data[1] == -2.0);
  CHECK(checkpoint_diff(before, read_checkpoint(dir / "b.ckpt")) == std::vector<std::string>{"layer.w"});

  load_checkpoint(store, dir / "a.ckpt");
  CHECK(w.data()[1] == -2.0);

  ParameterStore other;
  other.create("layer.w", {4}, {0, 0, 0, 0});
  other.create("layer.b", {2}, {0, 0});
  CHECK_THROWS_AS(load_checkpoint(other, dir / "a.ckpt"), ValidationError);
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST_CASE("glob patterns") {
  CHECK(glob_match("phi.*", "phi.weight"));
  CHECK(glob_match("decoder.layer*.head*.wq", "decoder.layer1.head0.wq"));
  CHECK_FALSE(glob_match("decoder.layer*.head*.wq", "decoder.layer1.head0.wo"));
  CHECK(glob_match("*lora*", "decoder.layer0.head0.lora.q.a"));
}
