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

#include "citysound/nnet/adam.hpp"

#include <algorithm>
#include <cmath>

#include "citysound/errors.hpp"

namespace citysound::nnet {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adam: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  if (!(decay >= 0.0)) throw ConfigError("adam: decay must be >= 0");
}

template <typename Scalar>
Adam<Scalar>::Adam(AdamConfig config) : config_(config) {
  config_.validate();
}

template <typename Scalar>
void Adam<Scalar>::step(std::span<Parameter<Scalar>* const> params) {
  std::vector<Parameter<Scalar>*> trainable;
  for (auto* p : params) {
    if (!p->trainable) continue;
    if (p->grad.size() != p->value.size()) {
      throw ShapeError("adam: gradient for '" + p->name + "' is not shaped like its parameter");
    }
    for (Scalar g : p->grad) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in '" + p->name + "'");
    }
    trainable.push_back(p);
  }
  if (m_.empty()) {
    for (auto* p : trainable) {
      m_.emplace_back(p->value.size(), Scalar(0));
      v_.emplace_back(p->value.size(), Scalar(0));
      if (config_.amsgrad) v_max_.emplace_back(p->value.size(), Scalar(0));
    }
  }
  if (m_.size() != trainable.size()) {
    throw ShapeError("adam: parameter list changed between steps");
  }
  for (std::size_t k = 0; k < trainable.size(); ++k) {
    if (m_[k].size() != trainable[k]->value.size()) {
      throw ShapeError("adam: parameter '" + trainable[k]->name + "' changed size");
    }
  }

  const double lr_t = config_.lr / (1.0 + config_.decay * static_cast<double>(t_));
  ++t_;
  const double t = static_cast<double>(t_);
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);

  for (std::size_t k = 0; k < trainable.size(); ++k) {
    auto& value = trainable[k]->value;
    const auto& grad = trainable[k]->grad;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<Scalar>(mi);
      v[i] = static_cast<Scalar>(vi);
      double v_used = vi;
      if (config_.amsgrad) {
        auto& vmax = v_max_[k][i];
        vmax = std::max(vmax, static_cast<Scalar>(vi));
        v_used = vmax;
      }
      const double v_hat = v_used / correction2;
      const double m_hat = mi / correction1;
      value[i] = static_cast<Scalar>(value[i] - lr_t * m_hat / (std::sqrt(v_hat) + config_.epsilon));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace citysound::nnet
