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

#include "citysound/nnet/tensor.hpp"

namespace citysound::nnet {

// Probabilities are clipped to [kProbClip, 1 - kProbClip] before the log;
// the gradient is zero where clipping is active.
inline constexpr double kProbClip = 1e-7;

template <typename Scalar>
struct LossResult {
  double value = 0.0;
  Tensor4<Scalar> grad;  // dL/dpred
};

// Mean over rows (every (n, h, w) position) of -sum_c t_c ln p_c.
template <typename Scalar>
LossResult<Scalar> categorical_cross_entropy(const Tensor4<Scalar>& pred,
                                             const Tensor4<Scalar>& target);

// Mean over rows and classes of -[t ln p + (1 - t) ln(1 - p)].
template <typename Scalar>
LossResult<Scalar> binary_cross_entropy(const Tensor4<Scalar>& pred,
                                        const Tensor4<Scalar>& target);

}  // namespace citysound::nnet
