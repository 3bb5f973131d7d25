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

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "citysound/nnet/tensor.hpp"
#include "citysound/rng.hpp"

namespace citysound::nnet {

enum class LayerKind : std::uint32_t {
  kConv2d = 1,
  kBatchNorm = 2,
  kMaxPool2d = 3,
  kDropout = 4,
  kFlatten = 5,
  kDense = 6,
  kRelu = 7,
  kSoftmax = 8,
  kSigmoid = 9,
};

std::string_view to_string(LayerKind kind);

struct Window2 {
  int h = 1;
  int w = 1;
  friend bool operator==(const Window2&, const Window2&) = default;
};

// Declarative description of one layer; all padding is "same".
struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  int units = 0;       // conv filters or dense units
  Window2 window;      // conv kernel or pool size, (time, mel)
  int stride = 1;
  double rate = 0.0;   // dropout probability

  static LayerSpec conv2d(int filters, Window2 kernel, int stride = 1);
  static LayerSpec batch_norm();
  static LayerSpec max_pool2d(Window2 pool, int stride);
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
  static LayerSpec dense(int units);
  static LayerSpec relu();
  static LayerSpec softmax();
  static LayerSpec sigmoid();

  // Throws ConfigError for parameters invalid for the kind.
  void validate() const;
  std::string describe() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Same-padding arithmetic: out = ceil(in / stride), total padding
// max((out - 1) * stride + window - in, 0), split with floor(total/2) first.
struct SamePadding {
  std::size_t out = 0;
  std::size_t before = 0;
  std::size_t after = 0;
};
SamePadding same_padding(std::size_t in, int window, int stride);

// Output shape of `spec` applied to `in`; throws ShapeError.
Shape4 output_shape(const LayerSpec& spec, const Shape4& in);

enum class Mode { kTrain, kInference };

template <typename Scalar>
struct Parameter {
  std::string name;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;
  bool trainable = true;
};

inline constexpr double kBatchNormMomentum = 0.99;
inline constexpr double kBatchNormEpsilon = 1e-3;

template <typename Scalar>
class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(spec) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const LayerSpec& spec() const { return spec_; }

  virtual Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) = 0;
  // Consumes dL/dy for the most recent forward; overwrites parameter grads
  // and returns dL/dx.
  virtual Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) = 0;

  virtual std::vector<Parameter<Scalar>*> parameters() { return {}; }
  virtual void reseed(std::uint64_t /*seed*/) {}

 private:
  LayerSpec spec_;
};

// Glorot-uniform kernel [kh][kw][in][out], zero bias.
template <typename Scalar>
class Conv2d final : public Layer<Scalar> {
 public:
  Conv2d(const LayerSpec& spec, std::size_t in_channels, std::uint64_t seed);

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override;
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) override;
  std::vector<Parameter<Scalar>*> parameters() override { return {&kernel_, &bias_}; }

  // The first layer of a network never needs dL/dx.
  void set_input_grad(bool enabled) { input_grad_ = enabled; }
  Parameter<Scalar>& kernel() { return kernel_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  void im2col(const Tensor4<Scalar>& x, std::size_t n, std::vector<Scalar>& col) const;

  std::size_t in_channels_;
  Parameter<Scalar> kernel_;
  Parameter<Scalar> bias_;
  bool input_grad_ = true;
  Tensor4<Scalar> input_;
  SamePadding pad_h_, pad_w_;
};

// Running statistics use momentum 0.99 with zero-debiasing, so early
// estimates are not pulled towards the (0, 1) initial values.
template <typename Scalar>
class BatchNorm final : public Layer<Scalar> {
 public:
  BatchNorm(const LayerSpec& spec, std::size_t channels);

  // Train mode needs at least two samples; throws BatchSizeError otherwise.
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override;
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) override;
  std::vector<Parameter<Scalar>*> parameters() override {
    return {&gamma_, &beta_, &moving_mean_, &moving_variance_, &updates_};
  }

  Parameter<Scalar>& gamma() { return gamma_; }
  Parameter<Scalar>& beta() { return beta_; }
  Parameter<Scalar>& moving_mean() { return moving_mean_; }
  Parameter<Scalar>& moving_variance() { return moving_variance_; }
  Parameter<Scalar>& moving_updates() { return updates_; }

 private:
  Parameter<Scalar> gamma_, beta_, moving_mean_, moving_variance_, updates_;
  Mode mode_ = Mode::kInference;
  Tensor4<Scalar> xhat_;
  std::vector<double> inv_std_;
};

// Max over each window with -inf padding; the gradient goes to the first
// (row-major) maximal element.
template <typename Scalar>
class MaxPool2d final : public Layer<Scalar> {
 public:
  explicit MaxPool2d(const LayerSpec& spec) : Layer<Scalar>(spec) {}

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override;
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) override;

 private:
  Shape4 in_shape_;
  std::vector<std::size_t> argmax_;
};

// Inverted dropout; the mask of the last train-mode forward is reused by
// backward.
template <typename Scalar>
class Dropout final : public Layer<Scalar> {
 public:
  Dropout(const LayerSpec& spec, std::uint64_t seed) : Layer<Scalar>(spec), rng_(seed) {}

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override;
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) override;
  void reseed(std::uint64_t seed) override { rng_ = Rng(seed); }

 private:
  Rng rng_;
  std::vector<Scalar> mask_;  // empty: identity
};

template <typename Scalar>
class Flatten final : public Layer<Scalar> {
 public:
  explicit Flatten(const LayerSpec& spec) : Layer<Scalar>(spec) {}
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override;
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) override;

 private:
  Shape4 in_shape_;
};

// Acts on (n, 1, 1, features).
template <typename Scalar>
class Dense final : public Layer<Scalar> {
 public:
  Dense(const LayerSpec& spec, std::size_t in_features, std::uint64_t seed);

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override;
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) override;
  std::vector<Parameter<Scalar>*> parameters() override { return {&kernel_, &bias_}; }

  Parameter<Scalar>& kernel() { return kernel_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  std::size_t in_features_;
  Parameter<Scalar> kernel_;
  Parameter<Scalar> bias_;
  Tensor4<Scalar> input_;
};

template <typename Scalar>
class Relu final : public Layer<Scalar> {
 public:
  explicit Relu(const LayerSpec& spec) : Layer<Scalar>(spec) {}
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override;
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) override;

 private:
  Tensor4<Scalar> input_;
};

// Over the channel axis, max-subtracted.
template <typename Scalar>
class Softmax final : public Layer<Scalar> {
 public:
  explicit Softmax(const LayerSpec& spec) : Layer<Scalar>(spec) {}
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override;
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) override;

 private:
  Tensor4<Scalar> output_;
};

template <typename Scalar>
class Sigmoid final : public Layer<Scalar> {
 public:
  explicit Sigmoid(const LayerSpec& spec) : Layer<Scalar>(spec) {}
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, Mode mode) override;
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) override;

 private:
  Tensor4<Scalar> output_;
};

// Instantiates `spec` for per-sample input shape `in` (n ignored).
template <typename Scalar>
std::unique_ptr<Layer<Scalar>> make_layer(const LayerSpec& spec, const Shape4& in,
                                          std::uint64_t seed);

}  // namespace citysound::nnet
