// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <span>

#include "octoconv/ops.hpp"
#include "octoconv/tensor.hpp"
#include "gradient_checks.hpp"
#include "test_support.hpp"

namespace octoconv {
namespace {

using testing::compare_gradients;
using testing::numeric_gradient;
using testing::random_tensor;

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3, 4}, 1.5f);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.offset({1, 2, 3}), 23u);
  t.at({1, 0, 2}) = 7.0f;
  EXPECT_EQ(t[14], 7.0f);
  EXPECT_THROW(t.at({2, 0, 0}), ShapeError);
  EXPECT_THROW(t.at({0, 0}), ShapeError);
  EXPECT_EQ(t.reshaped({6, 4}).shape(), (Shape{6, 4}));
  EXPECT_THROW(t.reshaped({5, 5}), ShapeError);
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 0, 3}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_THROW(max_abs_diff(Tensor({2}), Tensor({3})), ShapeError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({3});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Ops, Relu) {
  const Tensor x({3}, {-1.0f, 0.0f, 2.0f});
  EXPECT_EQ(relu(x), Tensor({3}, {0.0f, 0.0f, 2.0f}));
  EXPECT_EQ(relu_backward(Tensor({3}, 5.0f), x), Tensor({3}, {0.0f, 0.0f, 5.0f}));
}

TEST(Ops, SoftmaxCrossEntropySymmetric) {
  const auto r = softmax_cross_entropy(Tensor({1, 2}, 0.0f), {0});
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-7);
  EXPECT_NEAR(r.grad[0], -0.5f, 1e-7);
  EXPECT_NEAR(r.grad[1], 0.5f, 1e-7);
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 2}), {2}), ShapeError);
  EXPECT_THROW(softmax_cross_entropy(Tensor({2, 2}), {0}), ShapeError);
}

TEST(Ops, SoftmaxStableForLargeLogits) {
  const Tensor p = softmax_rows(Tensor({1, 2}, {1000.0f, 1000.0f}));
  EXPECT_FLOAT_EQ(p[0], 0.5f);
  const auto r = softmax_cross_entropy(Tensor({1, 2}, {500.0f, -500.0f}), {1});
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 1000.0, 1e-3);
}

TEST(Ops, SoftmaxCrossEntropyGradient) {
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    EXPECT_LE(testing::cross_entropy_gradient_error(seed), 1e-3) << "seed " << seed;
}

TEST(Ops, MeanAndArgmax) {
  EXPECT_FLOAT_EQ(mean(Tensor({4}, {1, 2, 3, 6})), 3.0f);
  EXPECT_EQ(argmax_rows(Tensor({2, 3}, {0, 5, 1, 9, 2, 3})), (std::vector<std::size_t>{1, 0}));
}

// Direct max over each window, padded taps skipped.
Tensor naive_max_pool(const Tensor& x, const Pool3dSpec& spec) {
  std::array<std::size_t, 3> out{}, front{};
  for (int a = 0; a < 3; ++a) {
    const auto g = window_geometry(x.dim(2 + a), spec.window[a], spec.stride[a], spec.padding);
    out[a] = g.out;
    front[a] = g.pad_front;
  }
  Tensor y({x.dim(0), x.dim(1), out[0], out[1], out[2]});
  for (std::size_t b = 0; b < x.dim(0); ++b)
    for (std::size_t c = 0; c < x.dim(1); ++c)
      for (std::size_t z = 0; z < out[0]; ++z)
        for (std::size_t yy = 0; yy < out[1]; ++yy)
          for (std::size_t xx = 0; xx < out[2]; ++xx) {
            float best = -INFINITY;
            for (std::size_t kz = 0; kz < spec.window[0]; ++kz)
              for (std::size_t ky = 0; ky < spec.window[1]; ++ky)
                for (std::size_t kx = 0; kx < spec.window[2]; ++kx) {
                  const long iz = long(z * spec.stride[0] + kz) - long(front[0]);
                  const long iy = long(yy * spec.stride[1] + ky) - long(front[1]);
                  const long ix = long(xx * spec.stride[2] + kx) - long(front[2]);
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= long(x.dim(2)) || iy >= long(x.dim(3)) ||
                      ix >= long(x.dim(4)))
                    continue;
                  best = std::max(best, x.at({b, c, std::size_t(iz), std::size_t(iy), std::size_t(ix)}));
                }
            y.at({b, c, z, yy, xx}) = best;
          }
  return y;
}

TEST(Ops, MaxPoolMatchesNaive) {
  Rng rng(3);
  for (const Shape& s : {Shape{2, 3, 4, 6, 6}, Shape{1, 2, 3, 5, 7}, Shape{1, 1, 1, 3, 3}}) {
    const Tensor x = random_tensor(s, rng);
    for (Padding pad : {Padding::kSame, Padding::kValid}) {
      if (pad == Padding::kValid && s[2] < 2) continue;
      const Pool3dSpec spec{{2, 2, 2}, {2, 2, 2}, pad};
      EXPECT_EQ(max_pool3d(x, spec).output, naive_max_pool(x, spec));
    }
  }
}

TEST(Ops, MaxPoolGradientRoutesToArgmax) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    // Distinct values, 0.01 apart.
    Tensor x({1, 2, 3, 4, 5});
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < order.size(); ++i) x[order[i]] = 0.01f * static_cast<float>(i) - 0.5f;
    const Pool3dSpec spec;
    const auto fwd = max_pool3d(x, spec);
    const Tensor w = random_tensor(fwd.output.shape(), rng);
    const Tensor grad = max_pool3d_backward(w, fwd, x.shape());
    std::size_t nonzero = 0;
    for (float g : grad.data()) nonzero += g != 0.0f;
    EXPECT_EQ(nonzero, fwd.output.size());
    EXPECT_LE(testing::max_pool_gradient_error(seed), 1e-3) << "seed " << seed;
  }
}

}  // namespace
}  // namespace octoconv
