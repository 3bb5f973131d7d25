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
#include <span>
#include <vector>

#include "citysound/nnet/layers.hpp"

namespace citysound::nnet {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double decay = 0.0;  // lr / (1 + decay * iterations)
  bool amsgrad = false;

  void validate() const;
};

// Adam with bias-corrected moments:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   w <- w - lr_t * m_hat / (sqrt(v_hat) + eps)
// With amsgrad the running maximum of v is bias-corrected in its place.
// Moments are allocated lazily to match the parameter list on first step.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  // Updates every trainable parameter from its grad. All gradients are
  // checked first; a non-finite value throws NumericError and leaves the
  // parameters and state untouched.
  void step(std::span<Parameter<Scalar>* const> params);

  const AdamConfig& config() const { return config_; }
  std::uint64_t iterations() const { return t_; }

  // Moment storage, one entry per trainable parameter in step order.
  std::vector<std::vector<Scalar>>& first_moments() { return m_; }
  std::vector<std::vector<Scalar>>& second_moments() { return v_; }
  std::vector<std::vector<Scalar>>& max_second_moments() { return v_max_; }
  const std::vector<std::vector<Scalar>>& first_moments() const { return m_; }
  const std::vector<std::vector<Scalar>>& second_moments() const { return v_; }
  const std::vector<std::vector<Scalar>>& max_second_moments() const { return v_max_; }
  void set_iterations(std::uint64_t t) { t_ = t; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<Scalar>> m_, v_, v_max_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace citysound::nnet
