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

#include "citysound/nnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "citysound/errors.hpp"

namespace citysound::nnet {
namespace {

template <typename Scalar>
void check_shapes(const Tensor4<Scalar>& pred, const Tensor4<Scalar>& target, const char* what) {
  if (!(pred.shape() == target.shape())) {
    throw ShapeError(std::string(what) + ": prediction " + to_string(pred.shape()) +
                     " vs target " + to_string(target.shape()));
  }
  if (pred.empty()) throw ShapeError(std::string(what) + ": empty batch");
}

}  // namespace

template <typename Scalar>
LossResult<Scalar> categorical_cross_entropy(const Tensor4<Scalar>& pred,
                                             const Tensor4<Scalar>& target) {
  check_shapes(pred, target, "categorical_cross_entropy");
  const double rows = static_cast<double>(pred.size() / pred.shape().c);
  LossResult<Scalar> r{0.0, Tensor4<Scalar>(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = target[i];
    if (t == 0.0) continue;
    const double raw = pred[i];
    const double p = std::clamp(raw, kProbClip, 1.0 - kProbClip);
    r.value -= t * std::log(p);
    if (raw > kProbClip && raw < 1.0 - kProbClip) {
      r.grad[i] = static_cast<Scalar>(-t / (p * rows));
    }
  }
  r.value /= rows;
  return r;
}

template <typename Scalar>
LossResult<Scalar> binary_cross_entropy(const Tensor4<Scalar>& pred,
                                        const Tensor4<Scalar>& target) {
  check_shapes(pred, target, "binary_cross_entropy");
  const double count = static_cast<double>(pred.size());
  LossResult<Scalar> r{0.0, Tensor4<Scalar>(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = target[i];
    const double raw = pred[i];
    const double p = std::clamp(raw, kProbClip, 1.0 - kProbClip);
    r.value -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    if (raw > kProbClip && raw < 1.0 - kProbClip) {
      r.grad[i] = static_cast<Scalar>((-t / p + (1.0 - t) / (1.0 - p)) / count);
    }
  }
  r.value /= count;
  return r;
}

template LossResult<float> categorical_cross_entropy(const Tensor4<float>&, const Tensor4<float>&);
template LossResult<double> categorical_cross_entropy(const Tensor4<double>&, const Tensor4<double>&);
template LossResult<float> binary_cross_entropy(const Tensor4<float>&, const Tensor4<float>&);
template LossResult<double> binary_cross_entropy(const Tensor4<double>&, const Tensor4<double>&);

}  // namespace citysound::nnet
