// Copyright 2026 The citysound Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "adam.hpp"
#include "citysound/errors.hpp"
#include "citysound/nnet/adam.hpp"
#include "citysound/nnet/losses.hpp"
#include "gradcheck.hpp"

namespace citysound::nnet {
namespace {

Tensor4<double> row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor4<double>({1, 1, 1, n}, std::move(v));
}

TEST(CategoricalCrossEntropy, HandValues) {
  const auto perfect = categorical_cross_entropy(row({1, 0, 0}), row({1, 0, 0}));
  EXPECT_LE(perfect.value, -std::log(1.0 - 1e-7) + 1e-15);
  const auto uniform = categorical_cross_entropy(row(std::vector<double>(6, 1.0 / 6)), row({0, 0, 1, 0, 0, 0}));
  EXPECT_NEAR(uniform.value, std::log(6.0), 1e-12);
  EXPECT_NEAR(std::log(6.0), 1.7918, 1e-4);
  // Mean over rows.
  Tensor4<double> p({2, 1, 1, 2}, std::vector<double>{0.5, 0.5, 0.25, 0.75});
  Tensor4<double> t({2, 1, 1, 2}, std::vector<double>{1, 0, 1, 0});
  EXPECT_NEAR(categorical_cross_entropy(p, t).value, (std::log(2.0) + std::log(4.0)) / 2, 1e-12);
}

TEST(BinaryCrossEntropy, HandValues) {
  EXPECT_NEAR(binary_cross_entropy(row({0.5, 0.5, 0.5}), row({1, 0, 1})).value, std::log(2.0), 1e-12);
  const auto edge = binary_cross_entropy(row({1e-7, 1 - 1e-7}), row({1e-7, 1 - 1e-7}));
  EXPECT_LT(edge.value, 2e-6);
  const auto hard = binary_cross_entropy(row({0, 1}), row({0, 1}));
  EXPECT_NEAR(hard.value, -std::log(1 - 1e-7), 1e-12);
}

TEST(Losses, ShapeErrors) {
  EXPECT_THROW(categorical_cross_entropy(row({0.5, 0.5}), row({1, 0, 0})), ShapeError);
  EXPECT_THROW(binary_cross_entropy(Tensor4<double>(), Tensor4<double>()), ShapeError);
}

TEST(Losses, ClippedPredictionsStayFinite) {
  const auto r = categorical_cross_entropy(row({0, 1}), row({1, 0}));
  EXPECT_NEAR(r.value, -std::log(1e-7), 1e-9);
  EXPECT_TRUE(r.grad.all_finite());
}

TEST(Losses, GradientsMatchCentralDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    EXPECT_LT(testing::check_loss(LossKind::kCategoricalCrossEntropy, seed).worst, 1e-4);
    EXPECT_LT(testing::check_loss(LossKind::kBinaryCrossEntropy, seed).worst, 1e-4);
  }
}

Parameter<double> scalar(double w, double g) { return {"w", {w}, {g}, true}; }

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {1e-3, 0.5, -2.0, 1e4}) {
    auto p = scalar(1.0, g);
    Parameter<double>* ps[] = {&p};
    Adam<double> adam;
    adam.step(ps);
    const double delta = p.value[0] - 1.0;
    EXPECT_GE(std::abs(delta), 0.000999) << g;
    EXPECT_LE(std::abs(delta), 0.001) << g;
    EXPECT_LT(delta * g, 0.0);
    // Closed form for the first step.
    EXPECT_NEAR(delta, -0.001 * g / (std::abs(g) + 1e-7), 1e-15);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto p = scalar(0.3, 0.0);
  Parameter<double>* ps[] = {&p};
  Adam<double> adam;
  for (int i = 0; i < 1000; ++i) adam.step(ps);
  EXPECT_EQ(p.value[0], 0.3);
  EXPECT_EQ(adam.iterations(), 1000u);
}

std::vector<double> run_bowl(AdamConfig cfg, int steps) {
  auto p = scalar(1.0, 0.0);
  Parameter<double>* ps[] = {&p};
  Adam<double> adam(cfg);
  std::vector<double> w{1.0};
  for (int i = 0; i < steps; ++i) {
    p.grad[0] = 2.0 * p.value[0];
    adam.step(ps);
    w.push_back(p.value[0]);
  }
  return w;
}

TEST(Adam, BowlTrajectoryMatchesScalarOracle) {
  for (double lr : {0.001, 0.01}) {
    AdamConfig cfg;
    cfg.lr = lr;
    oracle::ScalarAdam ref;
    ref.lr = lr;
    const auto want = oracle::adam_trajectory(ref, 1.0L, 2000, [](long double w) { return 2 * w; });
    const auto got = run_bowl(cfg, 2000);
    for (std::size_t i = 0; i < got.size(); ++i) {
      ASSERT_NEAR(got[i], static_cast<double>(want[i]), 1e-9) << "lr " << lr << " step " << i;
    }
  }
}

TEST(Adam, BowlConvergence) {
  auto first_below = [](const std::vector<double>& w, double tol) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (std::abs(w[i]) < tol) return static_cast<int>(i);
    }
    return -1;
  };
  AdamConfig fast;
  fast.lr = 0.01;
  const int k_fast = first_below(run_bowl(fast, 500), 0.1);
  EXPECT_GT(k_fast, 0);
  EXPECT_LE(k_fast, 500);
  const int k_slow = first_below(run_bowl(AdamConfig{}, 2000), 0.1);
  EXPECT_GT(k_slow, 500);
  EXPECT_LE(k_slow, 2000);
}

TEST(Adam, DecayAndAmsgradMatchOracle) {
  AdamConfig cfg;
  cfg.lr = 0.05;
  cfg.decay = 0.01;
  cfg.amsgrad = true;
  cfg.beta2 = 0.9;
  oracle::ScalarAdam ref;
  ref.lr = 0.05L;
  ref.decay = 0.01L;
  ref.amsgrad = true;
  ref.beta2 = 0.9L;
  // Gradient magnitudes shrink then grow, so the running maximum matters.
  auto grad = [](double w, int t) { return (t < 50 ? 3.0 : 0.2) * std::cos(w + 0.1 * t); };
  auto p = scalar(0.5, 0.0);
  Parameter<double>* ps[] = {&p};
  Adam<double> adam(cfg);
  long double w = 0.5L;
  for (int t = 0; t < 200; ++t) {
    p.grad[0] = grad(p.value[0], t);
    adam.step(ps);
    w = ref.step(w, grad(static_cast<double>(w), t));
    ASSERT_NEAR(p.value[0], static_cast<double>(w), 1e-9) << t;
  }
  EXPECT_EQ(adam.max_second_moments().size(), 1u);
}

TEST(Adam, NonFiniteGradientRejectedAtomically) {
  auto a = scalar(1.0, 0.5);
  auto b = scalar(2.0, std::numeric_limits<double>::quiet_NaN());
  Parameter<double>* ps[] = {&a, &b};
  Adam<double> adam;
  EXPECT_THROW(adam.step(ps), NumericError);
  EXPECT_EQ(a.value[0], 1.0);
  EXPECT_EQ(b.value[0], 2.0);
  EXPECT_EQ(adam.iterations(), 0u);
}

TEST(Adam, SkipsFrozenParameters) {
  auto a = scalar(1.0, 0.5);
  auto frozen = scalar(2.0, 0.5);
  frozen.trainable = false;
  Parameter<double>* ps[] = {&a, &frozen};
  Adam<double> adam;
  adam.step(ps);
  EXPECT_NE(a.value[0], 1.0);
  EXPECT_EQ(frozen.value[0], 2.0);
  EXPECT_EQ(adam.first_moments().size(), 1u);
}

TEST(AdamConfig, Validation) {
  AdamConfig c;
  c.lr = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.beta2 = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epsilon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.decay = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace citysound::nnet
