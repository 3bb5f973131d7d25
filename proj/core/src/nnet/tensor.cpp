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

#include "citysound/nnet/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "citysound/errors.hpp"

namespace citysound::nnet {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.h) + ", " +
         std::to_string(s.w) + ", " + std::to_string(s.c) + ")";
}

template <typename Scalar>
Tensor4<Scalar>::Tensor4(Shape4 shape, std::vector<Scalar> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw ShapeError("tensor: " + std::to_string(values_.size()) +
                     " values do not fill shape " + to_string(shape_));
  }
}

template <typename Scalar>
Tensor4<Scalar> Tensor4<Scalar>::reshaped(Shape4 shape) const& {
  return Tensor4(shape, values_);
}

template <typename Scalar>
Tensor4<Scalar> Tensor4<Scalar>::reshaped(Shape4 shape) && {
  return Tensor4(shape, std::move(values_));
}

template <typename Scalar>
bool Tensor4<Scalar>::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](Scalar v) { return std::isfinite(v); });
}

template class Tensor4<float>;
template class Tensor4<double>;

}  // namespace citysound::nnet
