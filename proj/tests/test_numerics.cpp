/*
 * Copyright 2026 The nlent Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "nlent/losses.hpp"
#include "nlent/numerics.hpp"
#include "nlent/random.hpp"

namespace nlent {
namespace {

TEST(Softmax, ZeroLogitsAreUniform) {
  const auto p = softmax(DenseMatrix{{0.0, 0.0}});
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  const auto p = softmax(DenseMatrix{{1e4, 0.0}});
  // exp(-1e4) underflows; the exact answer is 1 - 4.5e-4343.
  EXPECT_NEAR(p(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(p(0, 0)));
}

TEST(Softmax, RejectsNonFinite) {
  EXPECT_THROW(softmax(DenseMatrix{{0.0, std::nan("")}}), InvalidInput);
  EXPECT_THROW(softmax(DenseMatrix{{0.0, INFINITY}}), InvalidInput);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
  Xoshiro256 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(12);
    DenseMatrix z(3, k);
    for (double& v : z.values()) v = 10.0 * rng.normal();
    const double shift = rng.uniform(-50.0, 50.0);
    DenseMatrix shifted = z;
    for (double& v : shifted.values()) v += shift;
    const auto p = softmax(z);
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < 3; ++i) {
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        sum += p(i, c);
        EXPECT_NEAR(p(i, c), q(i, c), 1e-12);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(OneHot, Encodes) {
  const auto p = one_hot(LabelVector({2}, 4));
  EXPECT_EQ(p.matrix(), (DenseMatrix{{0, 0, 1, 0}}));
  EXPECT_EQ(one_hot(LabelVector({0}, 2)).matrix(), (DenseMatrix{{1, 0}}));
  EXPECT_EQ(one_hot(LabelVector({0, 1}, 2)).matrix(), (DenseMatrix{{1, 0}, {0, 1}}));
}

TEST(LabelVectorTest, RejectsOutOfRange) {
  EXPECT_THROW(LabelVector({4}, 4), InvalidInput);
  EXPECT_THROW(LabelVector({-1}, 4), InvalidInput);
  EXPECT_THROW(LabelVector({0}, 1), InvalidInput);
}

TEST(ProbBatchTest, Validates) {
  EXPECT_THROW(ProbBatch(DenseMatrix{{0.5, 0.6}}), InvalidInput);
  EXPECT_THROW(ProbBatch(DenseMatrix{{1.5, -0.5}}), InvalidInput);
  EXPECT_NO_THROW(ProbBatch(DenseMatrix{{0.25, 0.75}}));
}

TEST(Entropy, Examples) {
  EXPECT_NEAR(mean_prediction_entropy(ProbBatch(DenseMatrix{{0.25, 0.25, 0.25, 0.25}})),
              1.3862943611198906, 1e-12);
  EXPECT_EQ(mean_prediction_entropy(ProbBatch(DenseMatrix{{0, 1, 0}})), 0.0);
  EXPECT_NEAR(mean_prediction_entropy(ProbBatch(DenseMatrix{{1, 0}, {0.5, 0.5}})),
              0.34657359027997264, 1e-12);
  EXPECT_THROW(mean_prediction_entropy(ProbBatch(DenseMatrix(0, 3))), InvalidInput);
}

TEST(Entropy, BoundedByLogClasses) {
  Xoshiro256 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + rng.below(20);
    DenseMatrix z(4, k);
    for (double& v : z.values()) v = 5.0 * rng.normal();
    const double h = mean_prediction_entropy(softmax(z));
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST(Entropy, Reduction) {
  EXPECT_NEAR(entropy_reduction(0.9, 0.2), 0.7, 1e-15);
  EXPECT_EQ(entropy_reduction(0.4, 0.4), 0.0);
  EXPECT_NEAR(entropy_reduction(0.2, 0.9), -0.7, 1e-15);
}

TEST(SoftmaxBackward, Examples) {
  const ProbBatch half(DenseMatrix{{0.5, 0.5}});
  const auto dz = softmax_backward(half, DenseMatrix{{1.0, 0.0}});
  EXPECT_DOUBLE_EQ(dz(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(dz(0, 1), -0.25);

  const ProbBatch p(DenseMatrix{{0.2, 0.3, 0.5}});
  const auto flat = softmax_backward(p, DenseMatrix{{3.0, 3.0, 3.0}});
  for (double v : flat.values()) EXPECT_NEAR(v, 0.0, 1e-15);

  const auto saturated = softmax(DenseMatrix{{60.0, 0.0, 0.0}});
  const auto dsat = softmax_backward(saturated, DenseMatrix{{-1.0 / clamp_prob(saturated(0, 0)), 0, 0}});
  for (double v : dsat.values()) EXPECT_NEAR(v, 0.0, 1e-20);

  EXPECT_THROW(softmax_backward(half, DenseMatrix{{1.0, 0.0, 0.0}}), InvalidInput);
}

TEST(FiniteDiff, QuadraticIsExact) {
  const std::vector<double> x{1.0, 2.0};
  const auto g = finite_diff_gradient(
      [](std::span<const double> v) { return v[0] * v[0] + v[1] * v[1]; }, x, 1e-5);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);
}

TEST(FiniteDiff, ConstantHasZeroGradient) {
  const std::vector<double> x{3.0, -1.0, 0.5};
  for (double v : finite_diff_gradient([](std::span<const double>) { return 7.0; }, x)) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(FiniteDiff, ErrorsOnNonFiniteAndBadStep) {
  const std::vector<double> x{0.0};
  EXPECT_THROW(finite_diff_gradient([](std::span<const double> v) { return std::log(v[0]); }, x),
               OracleFailure);
  EXPECT_THROW(finite_diff_gradient([](std::span<const double>) { return 0.0; }, x, 0.0),
               InvalidInput);
}

// Softmax cross-entropy has the closed-form logit gradient p - onehot(y);
// the oracle must reproduce it.
TEST(FiniteDiff, MatchesSoftmaxCrossEntropy) {
  Xoshiro256 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(8);
    std::vector<double> z(k);
    for (double& v : z) v = rng.normal();
    const int y = static_cast<int>(rng.below(k));
    const auto f = [&](std::span<const double> logits) {
      double m = *std::max_element(logits.begin(), logits.end());
      double s = 0.0;
      for (double v : logits) s += std::exp(v - m);
      return -(logits[y] - m - std::log(s));
    };
    const auto numeric = finite_diff_gradient(f, z);
    const auto p = softmax(DenseMatrix(1, k, z));
    std::vector<double> analytic(k);
    for (std::size_t c = 0; c < k; ++c) analytic[c] = p(0, c) - (static_cast<int>(c) == y ? 1.0 : 0.0);
    EXPECT_LT(relative_error(analytic, numeric), 1e-6);
  }
}

TEST(RandomTest, XoshiroReferenceOutput) {
  // xoshiro256** with its state filled by SplitMix64 from seed 0; values
  // from an independent reimplementation.
  Xoshiro256 rng(0);
  EXPECT_EQ(rng(), 0x99ec5f36cb75f2b4ULL);
  EXPECT_EQ(rng(), 0xbf6e1f784956452aULL);
  EXPECT_EQ(rng(), 0x1a5f849d4933e6e0ULL);
}

TEST(RandomTest, BelowStaysInRangeAndCoversIt) {
  Xoshiro256 rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

}  // namespace
}  // namespace nlent
