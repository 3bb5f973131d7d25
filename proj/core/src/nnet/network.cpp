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

#include "citysound/nnet/network.hpp"

#include <cmath>

#include "citysound/errors.hpp"
#include "citysound/rng.hpp"

namespace citysound::nnet {
namespace {

Shape4 checked_output(const LayerSpec& layer, const Shape4& in) {
  if (layer.kind == LayerKind::kConv2d &&
      (in.h < static_cast<std::size_t>(layer.window.h) ||
       in.w < static_cast<std::size_t>(layer.window.w))) {
    throw ShapeError(layer.describe() + ": input " + to_string(in) + " is smaller than the kernel");
  }
  return output_shape(layer, in);
}

}  // namespace

ShapeTrace infer_shapes(const NetworkSpec& spec) {
  if (spec.heads.empty()) throw ShapeError("network: at least one head is required");
  ShapeTrace trace;
  Shape4 shape{1, spec.input.h, spec.input.w, spec.input.c};
  for (const auto& layer : spec.trunk) {
    shape = checked_output(layer, shape);
    trace.trunk.push_back(shape);
  }
  for (const auto& head : spec.heads) {
    Shape4 s = shape;
    auto& out = trace.heads.emplace_back();
    for (const auto& layer : head.layers) {
      s = checked_output(layer, s);
      out.push_back(s);
    }
    if (s.h != 1 || s.w != 1) {
      throw ShapeError("network head '" + head.name + "' must end in a flat output, got " +
                       to_string(s));
    }
  }
  return trace;
}

template <typename Scalar>
Network<Scalar>::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  infer_shapes(spec_);
  Shape4 shape{1, spec_.input.h, spec_.input.w, spec_.input.c};
  for (std::size_t i = 0; i < spec_.trunk.size(); ++i) {
    trunk_.push_back(make_layer<Scalar>(spec_.trunk[i], shape, derive_seed(seed, 0, i)));
    shape = output_shape(spec_.trunk[i], shape);
  }
  for (std::size_t h = 0; h < spec_.heads.size(); ++h) {
    Shape4 s = shape;
    auto& layers = heads_.emplace_back();
    for (std::size_t i = 0; i < spec_.heads[h].layers.size(); ++i) {
      const auto& layer = spec_.heads[h].layers[i];
      layers.push_back(make_layer<Scalar>(layer, s, derive_seed(seed, 1 + h, i)));
      s = output_shape(layer, s);
    }
  }
  set_input_grad(false);
}

template <typename Scalar>
void Network<Scalar>::set_input_grad(bool enabled) {
  input_grad_ = enabled;
  Layer<Scalar>* first = !trunk_.empty() ? trunk_.front().get()
                                         : (heads_.size() == 1 && !heads_[0].empty() ? heads_[0].front().get() : nullptr);
  if (auto* conv = dynamic_cast<Conv2d<Scalar>*>(first)) conv->set_input_grad(enabled);
}

template <typename Scalar>
void Network<Scalar>::reseed(std::uint64_t seed) {
  for (std::size_t i = 0; i < trunk_.size(); ++i) trunk_[i]->reseed(derive_seed(seed, 0, i));
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    for (std::size_t i = 0; i < heads_[h].size(); ++i) {
      heads_[h][i]->reseed(derive_seed(seed, 1 + h, i));
    }
  }
}

template <typename Scalar>
std::vector<Tensor4<Scalar>> Network<Scalar>::forward(const Tensor4<Scalar>& x, Mode mode) {
  const Shape3 in{x.shape().h, x.shape().w, x.shape().c};
  if (!(in == spec_.input)) {
    throw ShapeError("network: expected per-sample input (" + std::to_string(spec_.input.h) + ", " +
                     std::to_string(spec_.input.w) + ", " + std::to_string(spec_.input.c) +
                     "), got " + to_string(x.shape()));
  }
  Tensor4<Scalar> shared = x;
  for (auto& layer : trunk_) shared = layer->forward(shared, mode);
  std::vector<Tensor4<Scalar>> outputs;
  for (auto& head : heads_) {
    Tensor4<Scalar> y = shared;
    for (auto& layer : head) y = layer->forward(y, mode);
    outputs.push_back(std::move(y));
  }
  return outputs;
}

template <typename Scalar>
Tensor4<Scalar> Network<Scalar>::backward(std::span<const Tensor4<Scalar>> head_grads) {
  if (head_grads.size() != heads_.size()) {
    throw ShapeError("network backward: expected " + std::to_string(heads_.size()) +
                     " head gradients, got " + std::to_string(head_grads.size()));
  }
  Tensor4<Scalar> shared;
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    Tensor4<Scalar> g = head_grads[h];
    for (auto it = heads_[h].rbegin(); it != heads_[h].rend(); ++it) g = (*it)->backward(g);
    if (h == 0) {
      shared = std::move(g);
    } else {
      if (!(g.shape() == shared.shape())) throw ShapeError("network backward: head shape mismatch");
      for (std::size_t i = 0; i < g.size(); ++i) shared[i] += g[i];
    }
  }
  for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) shared = (*it)->backward(shared);
  return input_grad_ ? shared : Tensor4<Scalar>();
}

template <typename Scalar>
typename Network<Scalar>::StepLoss Network<Scalar>::forward_backward(
    const Tensor4<Scalar>& x, std::span<const Tensor4<Scalar>> targets, Mode mode) {
  if (targets.size() != heads_.size()) {
    throw ShapeError("network: expected " + std::to_string(heads_.size()) + " target tensors");
  }
  StepLoss result;
  result.outputs = forward(x, mode);
  std::vector<Tensor4<Scalar>> grads;
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    const auto& head = spec_.heads[h];
    LossResult<Scalar> loss =
        head.loss == LossKind::kBinaryCrossEntropy
            ? binary_cross_entropy(result.outputs[h], targets[h])
            : categorical_cross_entropy(result.outputs[h], targets[h]);
    if (!std::isfinite(loss.value)) {
      throw NumericError("network: non-finite loss in head '" + head.name + "'");
    }
    result.heads.push_back(loss.value);
    result.total += head.weight * loss.value;
    const auto w = static_cast<Scalar>(head.weight);
    for (std::size_t i = 0; i < loss.grad.size(); ++i) loss.grad[i] *= w;
    grads.push_back(std::move(loss.grad));
  }
  backward(grads);
  return result;
}

template <typename Scalar>
std::vector<Parameter<Scalar>*> Network<Scalar>::parameters() {
  std::vector<Parameter<Scalar>*> params;
  for (auto& layer : trunk_) {
    for (auto* p : layer->parameters()) params.push_back(p);
  }
  for (auto& head : heads_) {
    for (auto& layer : head) {
      for (auto* p : layer->parameters()) params.push_back(p);
    }
  }
  return params;
}

template class Network<float>;
template class Network<double>;

}  // namespace citysound::nnet
