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

#include "citysound/errors.hpp"
#include "citysound/nnet/layers.hpp"
#include "gradcheck.hpp"
#include "padding.hpp"
#include "test_support.hpp"

namespace citysound::nnet {
namespace {

using testing::random_tensor;

TEST(Conv2d, PointwiseIdentity) {
  const Shape4 in{2, 4, 5, 3};
  Conv2d<double> conv(LayerSpec::conv2d(3, {1, 1}), 3, 1);
  auto& k = conv.kernel().value;
  std::fill(k.begin(), k.end(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) k[i * 3 + i] = 1.0;
  const auto x = random_tensor<double>(in, 2);
  EXPECT_EQ(conv.forward(x, Mode::kInference), x);
}

TEST(Conv2d, OnesKernelHandSum) {
  Conv2d<double> conv(LayerSpec::conv2d(1, {3, 3}), 1, 1);
  std::fill(conv.kernel().value.begin(), conv.kernel().value.end(), 1.0);
  const Tensor4<double> x({1, 5, 5, 1}, 1.0);
  const auto y = conv.forward(x, Mode::kInference);
  EXPECT_EQ(y.shape(), (Shape4{1, 5, 5, 1}));
  EXPECT_DOUBLE_EQ(y(0, 2, 2, 0), 9.0);
  EXPECT_DOUBLE_EQ(y(0, 0, 0, 0), 4.0);  // zero padding at the corner
  EXPECT_DOUBLE_EQ(y(0, 0, 2, 0), 6.0);
}

TEST(Conv2d, GlorotInitialisationBounds) {
  Conv2d<float> conv(LayerSpec::conv2d(64, {7, 7}), 32, 5);
  const double limit = std::sqrt(6.0 / (7 * 7 * 32 + 7 * 7 * 64));
  double sum = 0;
  for (float v : conv.kernel().value) {
    ASSERT_LE(std::abs(v), limit);
    sum += v;
  }
  EXPECT_LT(std::abs(sum / conv.kernel().value.size()), limit / 20);
  for (float b : conv.bias().value) EXPECT_EQ(b, 0.0f);
}

TEST(BatchNorm, TrainModeStandardises) {
  BatchNorm<double> bn(LayerSpec::batch_norm(), 3);
  const auto x = random_tensor<double>({8, 3, 2, 3}, 4, -300.0, 500.0);
  const auto y = bn.forward(x, Mode::kTrain);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0, ss = 0, n = 0;
    for (std::size_t i = c; i < y.size(); i += 3) {
      s += y[i];
      ss += y[i] * y[i];
      ++n;
    }
    EXPECT_NEAR(s / n, 0.0, 1e-6);
    EXPECT_NEAR(ss / n - (s / n) * (s / n), 1.0, 1e-6);
  }
}

TEST(BatchNorm, AffineOnStandardisedInput) {
  BatchNorm<double> bn(LayerSpec::batch_norm(), 2);
  std::fill(bn.gamma().value.begin(), bn.gamma().value.end(), 2.0);
  std::fill(bn.beta().value.begin(), bn.beta().value.end(), 3.0);
  Tensor4<double> x({4, 1, 1, 2});
  const double z[4] = {-1.0, 1.0, -1.0, 1.0};  // mean 0, variance 1
  for (std::size_t i = 0; i < 4; ++i) {
    x(i, 0, 0, 0) = z[i];
    x(i, 0, 0, 1) = -z[i];
  }
  const auto y = bn.forward(x, Mode::kTrain);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, ss = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      s += y(i, 0, 0, c);
      ss += y(i, 0, 0, c) * y(i, 0, 0, c);
    }
    EXPECT_NEAR(s / 4, 3.0, 1e-12);
    EXPECT_NEAR(std::sqrt(ss / 4 - 9.0), 2.0 / std::sqrt(1.0 + kBatchNormEpsilon), 1e-9);
  }
}

TEST(BatchNorm, MovingStatisticsAndInference) {
  BatchNorm<double> bn(LayerSpec::batch_norm(), 1);
  Tensor4<double> x({2, 1, 1, 1}, std::vector<double>{1.0, 3.0});
  bn.forward(x, Mode::kTrain);
  // The first update takes the batch statistics outright.
  EXPECT_NEAR(bn.moving_mean().value[0], 2.0, 1e-12);
  EXPECT_NEAR(bn.moving_variance().value[0], 1.0, 1e-12);
  // Then (m b1 + b2) / (1 + m), the debiased two-term average.
  bn.forward(Tensor4<double>({2, 1, 1, 1}, std::vector<double>{4.0, 8.0}), Mode::kTrain);
  EXPECT_NEAR(bn.moving_mean().value[0], (0.99 * 2.0 + 6.0) / 1.99, 1e-12);
  EXPECT_NEAR(bn.moving_variance().value[0], (0.99 * 1.0 + 4.0) / 1.99, 1e-12);
  // Long runs of a fixed batch converge to its statistics.
  for (int i = 0; i < 3000; ++i) bn.forward(x, Mode::kTrain);
  EXPECT_NEAR(bn.moving_mean().value[0], 2.0, 1e-9);
  EXPECT_EQ(bn.moving_updates().value[0], 3002.0);
  bn.moving_mean().value[0] = 2.0;
  bn.moving_variance().value[0] = 4.0;
  const auto y = bn.forward(x, Mode::kInference);
  EXPECT_NEAR(y[0], -1.0 / std::sqrt(4.0 + kBatchNormEpsilon), 1e-12);
  EXPECT_FALSE(bn.moving_mean().trainable);
}

TEST(BatchNorm, SingleSampleTrainRejected) {
  BatchNorm<double> bn(LayerSpec::batch_norm(), 2);
  EXPECT_THROW(bn.forward(Tensor4<double>({1, 3, 3, 2}), Mode::kTrain), BatchSizeError);
  EXPECT_NO_THROW(bn.forward(Tensor4<double>({1, 3, 3, 2}), Mode::kInference));
}

TEST(MaxPool, UnitPoolIdentity) {
  MaxPool2d<double> pool(LayerSpec::max_pool2d({1, 1}, 1));
  const auto x = random_tensor<double>({2, 5, 3, 2}, 6);
  EXPECT_EQ(pool.forward(x, Mode::kTrain), x);
}

TEST(MaxPool, HandMaximum) {
  MaxPool2d<double> pool(LayerSpec::max_pool2d({2, 2}, 2));
  std::vector<double> v(16);
  for (int i = 0; i < 16; ++i) v[static_cast<std::size_t>(i)] = i + 1;
  const auto y = pool.forward(Tensor4<double>({1, 4, 4, 1}, v), Mode::kInference);
  ASSERT_EQ(y.shape(), (Shape4{1, 2, 2, 1}));
  EXPECT_EQ(y[0], 6.0);
  EXPECT_EQ(y[1], 8.0);
  EXPECT_EQ(y[2], 14.0);
  EXPECT_EQ(y[3], 16.0);
}

TEST(MaxPool, FirstMaximumReceivesGradient) {
  MaxPool2d<double> pool(LayerSpec::max_pool2d({2, 2}, 2));
  pool.forward(Tensor4<double>({1, 2, 2, 1}, 5.0), Mode::kTrain);
  const auto dx = pool.backward(Tensor4<double>({1, 1, 1, 1}, 1.0));
  EXPECT_EQ(dx[0], 1.0);
  EXPECT_EQ(dx[1] + dx[2] + dx[3], 0.0);
}

TEST(SamePadding, MatchesWindowEnumeration) {
  EXPECT_EQ(same_padding(7, 5, 2).out, 4u);
  for (std::size_t in = 1; in <= 40; ++in) {
    for (int window = 1; window <= 8; ++window) {
      for (int stride = 1; stride <= 4; ++stride) {
        const auto got = same_padding(in, window, stride);
        const auto want = oracle::enumerate_same(in, static_cast<std::size_t>(window), static_cast<std::size_t>(stride));
        ASSERT_EQ(got.out, want.out) << in << " " << window << " " << stride;
        ASSERT_EQ(got.before + got.after, want.total_pad);
        ASSERT_EQ(got.before, want.total_pad / 2);
      }
    }
  }
}

TEST(MaxPool, SamePaddedOutputDims) {
  MaxPool2d<double> pool(LayerSpec::max_pool2d({5, 5}, 2));
  const auto y = pool.forward(random_tensor<double>({1, 7, 7, 1}, 1), Mode::kInference);
  EXPECT_EQ(y.shape(), (Shape4{1, 4, 4, 1}));
}

TEST(Dropout, RateZeroAndInferenceIdentity) {
  const auto x = random_tensor<double>({3, 4, 4, 2}, 8);
  Dropout<double> none(LayerSpec::dropout(0.0), 1);
  EXPECT_EQ(none.forward(x, Mode::kTrain), x);
  EXPECT_EQ(none.forward(x, Mode::kInference), x);
  Dropout<double> some(LayerSpec::dropout(0.5), 1);
  EXPECT_EQ(some.forward(x, Mode::kInference), x);
  EXPECT_EQ(some.backward(x), x);
}

TEST(Dropout, SurvivalFractionAndMean) {
  Dropout<double> d(LayerSpec::dropout(0.3), 12);
  const Tensor4<double> x({4, 100, 100, 4}, 2.0);
  const auto y = d.forward(x, Mode::kTrain);
  std::size_t alive = 0;
  double sum = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0) {
      ++alive;
      EXPECT_NEAR(y[i], 2.0 / 0.7, 1e-12);
    }
    sum += y[i];
  }
  EXPECT_NEAR(static_cast<double>(alive) / y.size(), 0.7, 0.01);
  EXPECT_NEAR(sum / y.size(), 2.0, 0.04);
}

TEST(Dropout, ReseedReproducesMask) {
  Dropout<double> d(LayerSpec::dropout(0.4), 3);
  const auto x = random_tensor<double>({2, 8, 8, 2}, 3);
  d.reseed(99);
  const auto a = d.forward(x, Mode::kTrain);
  const auto b = d.forward(x, Mode::kTrain);
  d.reseed(99);
  EXPECT_EQ(d.forward(x, Mode::kTrain), a);
  EXPECT_NE(a, b);
}

TEST(Activations, HandValues) {
  Softmax<double> sm(LayerSpec::softmax());
  const auto p = sm.forward(Tensor4<double>({2, 1, 1, 6}), Mode::kInference);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(p[i], 1.0 / 6.0);
  Relu<double> relu(LayerSpec::relu());
  const auto r = relu.forward(Tensor4<double>({1, 1, 1, 3}, std::vector<double>{-1, 0, 2}), Mode::kTrain);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 0.0);
  EXPECT_EQ(r[2], 2.0);
  Sigmoid<double> sg(LayerSpec::sigmoid());
  const auto s = sg.forward(Tensor4<double>({1, 1, 1, 2}, std::vector<double>{0, 800}), Mode::kTrain);
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_TRUE(s.all_finite());
  // Large logits stay finite under max subtraction.
  const auto big = sm.forward(Tensor4<double>({1, 1, 1, 2}, std::vector<double>{1000, 0}), Mode::kTrain);
  EXPECT_DOUBLE_EQ(big[0], 1.0);
}

TEST(Flatten, KeepsBatchAndOrder) {
  Flatten<double> f(LayerSpec::flatten());
  const auto x = random_tensor<double>({2, 3, 4, 5}, 1);
  const auto y = f.forward(x, Mode::kTrain);
  EXPECT_EQ(y.shape(), (Shape4{2, 1, 1, 60}));
  EXPECT_EQ(y.data()[37], x.data()[37]);
  EXPECT_EQ(f.backward(y).shape(), x.shape());
}

TEST(Dense, AffineMap) {
  Dense<double> d(LayerSpec::dense(2), 3, 1);
  d.kernel().value = {1, 2, 3, 4, 5, 6};  // [in][out]
  d.bias().value = {0.5, -0.5};
  const auto y = d.forward(Tensor4<double>({1, 1, 1, 3}, std::vector<double>{1, 1, 1}), Mode::kTrain);
  EXPECT_DOUBLE_EQ(y[0], 9.5);
  EXPECT_DOUBLE_EQ(y[1], 11.5);
}

TEST(LayerSpec, Validation) {
  EXPECT_THROW(LayerSpec::conv2d(0, {3, 3}).validate(), ConfigError);
  EXPECT_THROW(LayerSpec::conv2d(4, {0, 3}).validate(), ConfigError);
  EXPECT_THROW(LayerSpec::max_pool2d({2, 2}, 0).validate(), ConfigError);
  EXPECT_THROW(LayerSpec::dropout(1.0).validate(), ConfigError);
  EXPECT_THROW(LayerSpec::dropout(-0.1).validate(), ConfigError);
  EXPECT_THROW(LayerSpec::dense(0).validate(), ConfigError);
  EXPECT_NO_THROW(LayerSpec::dropout(0.0).validate());
}

TEST(OutputShape, Errors) {
  EXPECT_THROW(output_shape(LayerSpec::dense(3), Shape4{1, 2, 2, 1}), ShapeError);
  EXPECT_THROW(output_shape(LayerSpec::softmax(), Shape4{1, 2, 1, 3}), ShapeError);
  EXPECT_EQ(output_shape(LayerSpec::conv2d(8, {3, 3}, 2), Shape4{1, 9, 4, 2}), (Shape4{1, 5, 2, 8}));
}

class LayerGradient : public ::testing::TestWithParam<LayerKind> {};

TEST_P(LayerGradient, MatchesCentralDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = testing::random_case(GetParam(), seed);
    const auto rep = testing::check_layer(c, seed);
    EXPECT_LT(rep.worst, 1e-4) << rep.where << " seed " << seed;
    EXPECT_GT(rep.checked, 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, LayerGradient,
                         ::testing::Values(LayerKind::kConv2d, LayerKind::kBatchNorm,
                                           LayerKind::kMaxPool2d, LayerKind::kDropout,
                                           LayerKind::kFlatten, LayerKind::kDense,
                                           LayerKind::kRelu, LayerKind::kSoftmax,
                                           LayerKind::kSigmoid),
                         [](const auto& info) { return std::string(to_string(info.param)); });

}  // namespace
}  // namespace citysound::nnet
