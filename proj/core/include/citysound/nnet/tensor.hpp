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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace citysound::nnet {

// (batch, height = time, width = mel, channels), NHWC.
struct Shape4 {
  std::size_t n = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;

  std::size_t size() const { return n * h * w * c; }
  std::size_t sample_size() const { return h * w * c; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);

template <typename Scalar>
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, Scalar fill = Scalar(0))
      : shape_(shape), values_(shape.size(), fill) {}
  Tensor4(Shape4 shape, std::vector<Scalar> values);

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  Scalar& operator()(std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
    return values_[index(n, h, w, c)];
  }
  Scalar operator()(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return values_[index(n, h, w, c)];
  }
  Scalar& operator[](std::size_t i) { return values_[i]; }
  Scalar operator[](std::size_t i) const { return values_[i]; }

  std::span<Scalar> data() { return values_; }
  std::span<const Scalar> data() const { return values_; }
  std::span<Scalar> sample(std::size_t n) {
    return std::span<Scalar>(values_).subspan(n * shape_.sample_size(), shape_.sample_size());
  }
  std::span<const Scalar> sample(std::size_t n) const {
    return std::span<const Scalar>(values_).subspan(n * shape_.sample_size(), shape_.sample_size());
  }

  // Same values viewed under a shape of equal size.
  Tensor4 reshaped(Shape4 shape) const&;
  Tensor4 reshaped(Shape4 shape) &&;

  bool all_finite() const;

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  std::size_t index(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return ((n * shape_.h + h) * shape_.w + w) * shape_.c + c;
  }

  Shape4 shape_;
  std::vector<Scalar> values_;
};

extern template class Tensor4<float>;
extern template class Tensor4<double>;

}  // namespace citysound::nnet
