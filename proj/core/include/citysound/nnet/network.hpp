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
#include <span>
#include <string>
#include <vector>

#include "citysound/nnet/layers.hpp"
#include "citysound/nnet/losses.hpp"

namespace citysound::nnet {

enum class LossKind : std::uint32_t {
  kCategoricalCrossEntropy = 1,
  kBinaryCrossEntropy = 2,
};

struct Shape3 {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

// One output branch; its layers run on the trunk output.
struct HeadSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  LossKind loss = LossKind::kCategoricalCrossEntropy;
  double weight = 1.0;

  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

// A shared trunk followed by one or more heads.
struct NetworkSpec {
  Shape3 input;
  std::vector<LayerSpec> trunk;
  std::vector<HeadSpec> heads;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Per-sample output shapes (n = 1) of every layer.
struct ShapeTrace {
  std::vector<Shape4> trunk;
  std::vector<std::vector<Shape4>> heads;
};

// Throws ShapeError when a layer cannot accept its input, including any
// convolution whose input is spatially smaller than its kernel.
ShapeTrace infer_shapes(const NetworkSpec& spec);

template <typename Scalar>
class Network {
 public:
  // Parameters are initialised from streams derived from (seed, branch,
  // layer index): adding a head leaves the trunk and other heads unchanged.
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  std::size_t n_heads() const { return heads_.size(); }

  std::vector<Tensor4<Scalar>> forward(const Tensor4<Scalar>& x, Mode mode);

  // dL/d(head output) per head, after the most recent forward. Overwrites
  // all parameter gradients. Returns dL/dx when input gradients are enabled.
  Tensor4<Scalar> backward(std::span<const Tensor4<Scalar>> head_grads);

  struct StepLoss {
    double total = 0.0;
    std::vector<double> heads;
    std::vector<Tensor4<Scalar>> outputs;
  };
  // Forward, weighted loss over heads and backward in one call.
  StepLoss forward_backward(const Tensor4<Scalar>& x,
                            std::span<const Tensor4<Scalar>> targets, Mode mode);

  // Trunk parameters first, then each head, in layer order.
  std::vector<Parameter<Scalar>*> parameters();

  void set_input_grad(bool enabled);
  void reseed(std::uint64_t seed);

  Layer<Scalar>& trunk_layer(std::size_t i) { return *trunk_[i]; }
  Layer<Scalar>& head_layer(std::size_t head, std::size_t i) { return *heads_[head][i]; }

 private:
  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer<Scalar>>> trunk_;
  std::vector<std::vector<std::unique_ptr<Layer<Scalar>>>> heads_;
  bool input_grad_ = false;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace citysound::nnet
