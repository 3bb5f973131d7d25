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

#include "citysound/nnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Core>

#include "citysound/errors.hpp"

namespace citysound::nnet {
namespace {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatMap = Eigen::Map<Mat<Scalar>>;
template <typename Scalar>
using ConstMatMap = Eigen::Map<const Mat<Scalar>>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Plain row-order loop: Eigen's vectorised column sums depend on buffer
// alignment, which would make training runs differ in the last bits.
template <typename Scalar>
void add_column_sums(const Scalar* rows, std::size_t n_rows, std::size_t n_cols, Scalar* out) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const Scalar* row = rows + r * n_cols;
    for (std::size_t c = 0; c < n_cols; ++c) out[c] += row[c];
  }
}

template <typename Scalar>
Parameter<Scalar> make_parameter(std::string name, std::size_t size, Scalar fill,
                                 bool trainable = true) {
  Parameter<Scalar> p;
  p.name = std::move(name);
  p.value.assign(size, fill);
  p.grad.assign(size, Scalar(0));
  p.trainable = trainable;
  return p;
}

template <typename Scalar>
void glorot_uniform(std::vector<Scalar>& values, std::size_t fan_in, std::size_t fan_out,
                    std::uint64_t seed) {
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : values) v = static_cast<Scalar>(rng.uniform(-limit, limit));
}

void expect_shape(const Shape4& got, const Shape4& want, const char* what) {
  if (!(got == want)) {
    throw ShapeError(std::string(what) + ": expected " + to_string(want) + ", got " +
                     to_string(got));
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kMaxPool2d: return "max_pool2d";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv2d(int filters, Window2 kernel, int stride) {
  return {LayerKind::kConv2d, filters, kernel, stride, 0.0};
}
LayerSpec LayerSpec::batch_norm() { return {LayerKind::kBatchNorm, 0, {1, 1}, 1, 0.0}; }
LayerSpec LayerSpec::max_pool2d(Window2 pool, int stride) {
  return {LayerKind::kMaxPool2d, 0, pool, stride, 0.0};
}
LayerSpec LayerSpec::dropout(double rate) { return {LayerKind::kDropout, 0, {1, 1}, 1, rate}; }
LayerSpec LayerSpec::flatten() { return {LayerKind::kFlatten, 0, {1, 1}, 1, 0.0}; }
LayerSpec LayerSpec::dense(int units) { return {LayerKind::kDense, units, {1, 1}, 1, 0.0}; }
LayerSpec LayerSpec::relu() { return {LayerKind::kRelu, 0, {1, 1}, 1, 0.0}; }
LayerSpec LayerSpec::softmax() { return {LayerKind::kSoftmax, 0, {1, 1}, 1, 0.0}; }
LayerSpec LayerSpec::sigmoid() { return {LayerKind::kSigmoid, 0, {1, 1}, 1, 0.0}; }

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::kConv2d:
      if (units < 1) throw ConfigError("conv2d: filters must be >= 1");
      [[fallthrough]];
    case LayerKind::kMaxPool2d:
      if (window.h < 1 || window.w < 1) throw ConfigError(describe() + ": window must be >= 1");
      if (stride < 1) throw ConfigError(describe() + ": stride must be >= 1");
      break;
    case LayerKind::kDropout:
      if (!(rate >= 0.0) || !(rate < 1.0)) throw ConfigError("dropout: rate must lie in [0, 1)");
      break;
    case LayerKind::kDense:
      if (units < 1) throw ConfigError("dense: units must be >= 1");
      break;
    case LayerKind::kBatchNorm:
    case LayerKind::kFlatten:
    case LayerKind::kRelu:
    case LayerKind::kSoftmax:
    case LayerKind::kSigmoid:
      break;
    default:
      throw ConfigError("unknown layer kind");
  }
}

std::string LayerSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind);
  switch (kind) {
    case LayerKind::kConv2d:
      os << "(" << units << ", " << window.h << "x" << window.w << ", s" << stride << ")";
      break;
    case LayerKind::kMaxPool2d:
      os << "(" << window.h << "x" << window.w << ", s" << stride << ")";
      break;
    case LayerKind::kDropout: os << "(" << rate << ")"; break;
    case LayerKind::kDense: os << "(" << units << ")"; break;
    default: break;
  }
  return os.str();
}

SamePadding same_padding(std::size_t in, int window, int stride) {
  const auto s = static_cast<std::size_t>(stride);
  const auto k = static_cast<std::size_t>(window);
  SamePadding p;
  p.out = (in + s - 1) / s;
  const std::size_t span = (p.out - 1) * s + k;
  const std::size_t total = span > in ? span - in : 0;
  p.before = total / 2;
  p.after = total - p.before;
  return p;
}

Shape4 output_shape(const LayerSpec& spec, const Shape4& in) {
  spec.validate();
  if (in.h == 0 || in.w == 0 || in.c == 0) {
    throw ShapeError(spec.describe() + ": empty input shape " + to_string(in));
  }
  switch (spec.kind) {
    case LayerKind::kConv2d:
      return {in.n, same_padding(in.h, spec.window.h, spec.stride).out,
              same_padding(in.w, spec.window.w, spec.stride).out,
              static_cast<std::size_t>(spec.units)};
    case LayerKind::kMaxPool2d:
      return {in.n, same_padding(in.h, spec.window.h, spec.stride).out,
              same_padding(in.w, spec.window.w, spec.stride).out, in.c};
    case LayerKind::kFlatten:
      return {in.n, 1, 1, in.h * in.w * in.c};
    case LayerKind::kDense:
      if (in.h != 1 || in.w != 1) {
        throw ShapeError("dense: expects flattened input, got " + to_string(in));
      }
      return {in.n, 1, 1, static_cast<std::size_t>(spec.units)};
    case LayerKind::kSoftmax:
      if (in.h != 1 || in.w != 1) {
        throw ShapeError("softmax: expects flattened input, got " + to_string(in));
      }
      return in;
    default:
      return in;
  }
}

// ---------------------------------------------------------------- Conv2d

template <typename Scalar>
Conv2d<Scalar>::Conv2d(const LayerSpec& spec, std::size_t in_channels, std::uint64_t seed)
    : Layer<Scalar>(spec), in_channels_(in_channels) {
  spec.validate();
  const auto kh = static_cast<std::size_t>(spec.window.h);
  const auto kw = static_cast<std::size_t>(spec.window.w);
  const auto out = static_cast<std::size_t>(spec.units);
  kernel_ = make_parameter<Scalar>("kernel", kh * kw * in_channels * out, Scalar(0));
  bias_ = make_parameter<Scalar>("bias", out, Scalar(0));
  glorot_uniform(kernel_.value, kh * kw * in_channels, kh * kw * out, seed);
}

template <typename Scalar>
void Conv2d<Scalar>::im2col(const Tensor4<Scalar>& x, std::size_t n,
                            std::vector<Scalar>& col) const {
  const auto& s = x.shape();
  const auto kh = static_cast<std::ptrdiff_t>(this->spec().window.h);
  const auto kw = static_cast<std::ptrdiff_t>(this->spec().window.w);
  const auto stride = static_cast<std::ptrdiff_t>(this->spec().stride);
  const auto cin = in_channels_;
  const auto H = static_cast<std::ptrdiff_t>(s.h);
  const auto W = static_cast<std::ptrdiff_t>(s.w);
  const std::size_t row_len = static_cast<std::size_t>(kh * kw) * cin;
  const auto sample = x.sample(n);
  Scalar* out = col.data();
  for (std::size_t oh = 0; oh < pad_h_.out; ++oh) {
    for (std::size_t ow = 0; ow < pad_w_.out; ++ow) {
      Scalar* row = out;
      const std::ptrdiff_t h0 = static_cast<std::ptrdiff_t>(oh) * stride -
                                static_cast<std::ptrdiff_t>(pad_h_.before);
      const std::ptrdiff_t w0 = static_cast<std::ptrdiff_t>(ow) * stride -
                                static_cast<std::ptrdiff_t>(pad_w_.before);
      const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, -w0);
      const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(kw, W - w0);
      for (std::ptrdiff_t i = 0; i < kh; ++i, row += kw * static_cast<std::ptrdiff_t>(cin)) {
        const std::ptrdiff_t ih = h0 + i;
        if (ih < 0 || ih >= H || j_lo >= j_hi) {
          std::fill(row, row + kw * static_cast<std::ptrdiff_t>(cin), Scalar(0));
          continue;
        }
        std::fill(row, row + j_lo * static_cast<std::ptrdiff_t>(cin), Scalar(0));
        const Scalar* src = sample.data() + (ih * W + w0 + j_lo) * static_cast<std::ptrdiff_t>(cin);
        std::copy(src, src + (j_hi - j_lo) * static_cast<std::ptrdiff_t>(cin),
                  row + j_lo * static_cast<std::ptrdiff_t>(cin));
        std::fill(row + j_hi * static_cast<std::ptrdiff_t>(cin),
                  row + kw * static_cast<std::ptrdiff_t>(cin), Scalar(0));
      }
      out += row_len;
    }
  }
}

template <typename Scalar>
Tensor4<Scalar> Conv2d<Scalar>::forward(const Tensor4<Scalar>& x, Mode /*mode*/) {
  const auto& s = x.shape();
  if (s.c != in_channels_) {
    throw ShapeError("conv2d: expected " + std::to_string(in_channels_) + " input channels, got " +
                     to_string(s));
  }
  pad_h_ = same_padding(s.h, this->spec().window.h, this->spec().stride);
  pad_w_ = same_padding(s.w, this->spec().window.w, this->spec().stride);
  const auto cout = static_cast<Eigen::Index>(this->spec().units);
  const auto P = static_cast<Eigen::Index>(pad_h_.out * pad_w_.out);
  const auto K = static_cast<Eigen::Index>(this->spec().window.h * this->spec().window.w) *
                 static_cast<Eigen::Index>(in_channels_);

  Tensor4<Scalar> y(Shape4{s.n, pad_h_.out, pad_w_.out, static_cast<std::size_t>(cout)});
  std::vector<Scalar> col(static_cast<std::size_t>(P * K));
  ConstMatMap<Scalar> weights(kernel_.value.data(), K, cout);
  Eigen::Map<const RowVec<Scalar>> b(bias_.value.data(), cout);
  for (std::size_t n = 0; n < s.n; ++n) {
    im2col(x, n, col);
    ConstMatMap<Scalar> cols(col.data(), P, K);
    MatMap<Scalar> out(y.sample(n).data(), P, cout);
    out.noalias() = cols * weights;
    out.rowwise() += b;
  }
  input_ = x;
  return y;
}

template <typename Scalar>
Tensor4<Scalar> Conv2d<Scalar>::backward(const Tensor4<Scalar>& dy) {
  const auto& s = input_.shape();
  const auto cout = static_cast<Eigen::Index>(this->spec().units);
  expect_shape(dy.shape(), Shape4{s.n, pad_h_.out, pad_w_.out, static_cast<std::size_t>(cout)},
               "conv2d backward");
  const auto kh = static_cast<std::ptrdiff_t>(this->spec().window.h);
  const auto kw = static_cast<std::ptrdiff_t>(this->spec().window.w);
  const auto stride = static_cast<std::ptrdiff_t>(this->spec().stride);
  const auto cin = static_cast<std::ptrdiff_t>(in_channels_);
  const auto P = static_cast<Eigen::Index>(pad_h_.out * pad_w_.out);
  const auto K = static_cast<Eigen::Index>(kh * kw * cin);
  const auto H = static_cast<std::ptrdiff_t>(s.h);
  const auto W = static_cast<std::ptrdiff_t>(s.w);

  MatMap<Scalar> dweights(kernel_.grad.data(), K, cout);
  Eigen::Map<RowVec<Scalar>> dbias(bias_.grad.data(), cout);
  ConstMatMap<Scalar> weights(kernel_.value.data(), K, cout);
  dweights.setZero();
  dbias.setZero();

  Tensor4<Scalar> dx;
  if (input_grad_) dx = Tensor4<Scalar>(s);
  std::vector<Scalar> col(static_cast<std::size_t>(P * K));
  Mat<Scalar> dcol;
  for (std::size_t n = 0; n < s.n; ++n) {
    im2col(input_, n, col);
    ConstMatMap<Scalar> cols(col.data(), P, K);
    ConstMatMap<Scalar> grad_out(dy.sample(n).data(), P, cout);
    dweights.noalias() += cols.transpose() * grad_out;
    add_column_sums(grad_out.data(), static_cast<std::size_t>(P), static_cast<std::size_t>(cout),
                    bias_.grad.data());
    if (!input_grad_) continue;

    dcol.noalias() = grad_out * weights.transpose();
    auto dx_sample = dx.sample(n);
    const Scalar* row = dcol.data();
    for (std::size_t oh = 0; oh < pad_h_.out; ++oh) {
      for (std::size_t ow = 0; ow < pad_w_.out; ++ow, row += K) {
        const std::ptrdiff_t h0 = static_cast<std::ptrdiff_t>(oh) * stride -
                                  static_cast<std::ptrdiff_t>(pad_h_.before);
        const std::ptrdiff_t w0 = static_cast<std::ptrdiff_t>(ow) * stride -
                                  static_cast<std::ptrdiff_t>(pad_w_.before);
        const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, -w0);
        const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(kw, W - w0);
        for (std::ptrdiff_t i = 0; i < kh; ++i) {
          const std::ptrdiff_t ih = h0 + i;
          if (ih < 0 || ih >= H) continue;
          const Scalar* src = row + (i * kw + j_lo) * cin;
          Scalar* dst = dx_sample.data() + (ih * W + w0 + j_lo) * cin;
          for (std::ptrdiff_t k = 0; k < (j_hi - j_lo) * cin; ++k) dst[k] += src[k];
        }
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------- BatchNorm

template <typename Scalar>
BatchNorm<Scalar>::BatchNorm(const LayerSpec& spec, std::size_t channels)
    : Layer<Scalar>(spec),
      gamma_(make_parameter<Scalar>("gamma", channels, Scalar(1))),
      beta_(make_parameter<Scalar>("beta", channels, Scalar(0))),
      moving_mean_(make_parameter<Scalar>("moving_mean", channels, Scalar(0), false)),
      moving_variance_(make_parameter<Scalar>("moving_variance", channels, Scalar(1), false)),
      updates_(make_parameter<Scalar>("moving_updates", 1, Scalar(0), false)) {}

template <typename Scalar>
Tensor4<Scalar> BatchNorm<Scalar>::forward(const Tensor4<Scalar>& x, Mode mode) {
  const auto& s = x.shape();
  const std::size_t C = gamma_.value.size();
  if (s.c != C) {
    throw ShapeError("batch_norm: expected " + std::to_string(C) + " channels, got " + to_string(s));
  }
  mode_ = mode;
  const std::size_t M = s.n * s.h * s.w;
  const auto data = x.data();
  inv_std_.assign(C, 0.0);
  std::vector<double> mean(C, 0.0);

  if (mode == Mode::kTrain) {
    if (s.n < 2) {
      throw BatchSizeError("batch_norm: train mode needs a batch of at least 2, got " +
                           std::to_string(s.n));
    }
    std::vector<double> var(C, 0.0);
    for (std::size_t r = 0; r < M; ++r) {
      const Scalar* row = data.data() + r * C;
      for (std::size_t c = 0; c < C; ++c) mean[c] += row[c];
    }
    for (auto& m : mean) m /= static_cast<double>(M);
    for (std::size_t r = 0; r < M; ++r) {
      const Scalar* row = data.data() + r * C;
      for (std::size_t c = 0; c < C; ++c) {
        const double d = row[c] - mean[c];
        var[c] += d * d;
      }
    }
    // Zero-debiased average: after n updates the statistics equal
    // sum_k (1 - m) m^(n-k) b_k / (1 - m^n).
    const double n = static_cast<double>(updates_.value[0]) + 1.0;
    const double m = kBatchNormMomentum;
    const double keep = m * (1.0 - std::pow(m, n - 1.0)) / (1.0 - std::pow(m, n));
    updates_.value[0] = static_cast<Scalar>(n);
    for (std::size_t c = 0; c < C; ++c) {
      var[c] /= static_cast<double>(M);
      inv_std_[c] = 1.0 / std::sqrt(var[c] + kBatchNormEpsilon);
      moving_mean_.value[c] =
          static_cast<Scalar>(keep * moving_mean_.value[c] + (1.0 - keep) * mean[c]);
      moving_variance_.value[c] =
          static_cast<Scalar>(keep * moving_variance_.value[c] + (1.0 - keep) * var[c]);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = moving_mean_.value[c];
      inv_std_[c] = 1.0 / std::sqrt(static_cast<double>(moving_variance_.value[c]) + kBatchNormEpsilon);
    }
  }

  xhat_ = Tensor4<Scalar>(s);
  Tensor4<Scalar> y(s);
  for (std::size_t r = 0; r < M; ++r) {
    const Scalar* in = data.data() + r * C;
    Scalar* xh_row = xhat_.data().data() + r * C;
    Scalar* y_row = y.data().data() + r * C;
    for (std::size_t c = 0; c < C; ++c) {
      const double xh = (in[c] - mean[c]) * inv_std_[c];
      xh_row[c] = static_cast<Scalar>(xh);
      y_row[c] = static_cast<Scalar>(gamma_.value[c] * xh + beta_.value[c]);
    }
  }
  return y;
}

template <typename Scalar>
Tensor4<Scalar> BatchNorm<Scalar>::backward(const Tensor4<Scalar>& dy) {
  expect_shape(dy.shape(), xhat_.shape(), "batch_norm backward");
  const std::size_t C = gamma_.value.size();
  const std::size_t M = dy.shape().n * dy.shape().h * dy.shape().w;
  std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
  const Scalar* g = dy.data().data();
  const Scalar* xh = xhat_.data().data();
  for (std::size_t r = 0; r < M; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      sum_dy[c] += g[r * C + c];
      sum_dy_xhat[c] += static_cast<double>(g[r * C + c]) * xh[r * C + c];
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    gamma_.grad[c] = static_cast<Scalar>(sum_dy_xhat[c]);
    beta_.grad[c] = static_cast<Scalar>(sum_dy[c]);
  }
  Tensor4<Scalar> dx(dy.shape());
  Scalar* out = dx.data().data();
  if (mode_ == Mode::kTrain) {
    const double m = static_cast<double>(M);
    std::vector<double> scale(C);
    for (std::size_t c = 0; c < C; ++c) scale[c] = gamma_.value[c] * inv_std_[c] / m;
    for (std::size_t r = 0; r < M; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t i = r * C + c;
        out[i] = static_cast<Scalar>(scale[c] * (m * g[i] - sum_dy[c] - xh[i] * sum_dy_xhat[c]));
      }
    }
  } else {
    for (std::size_t r = 0; r < M; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t i = r * C + c;
        out[i] = static_cast<Scalar>(g[i] * gamma_.value[c] * inv_std_[c]);
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------- MaxPool2d

template <typename Scalar>
Tensor4<Scalar> MaxPool2d<Scalar>::forward(const Tensor4<Scalar>& x, Mode /*mode*/) {
  const Shape4 out_shape = output_shape(this->spec(), x.shape());
  const auto& s = x.shape();
  in_shape_ = s;
  const auto ph = same_padding(s.h, this->spec().window.h, this->spec().stride);
  const auto pw = same_padding(s.w, this->spec().window.w, this->spec().stride);
  const auto stride = static_cast<std::ptrdiff_t>(this->spec().stride);
  const auto kh = static_cast<std::ptrdiff_t>(this->spec().window.h);
  const auto kw = static_cast<std::ptrdiff_t>(this->spec().window.w);
  const std::size_t C = s.c;

  Tensor4<Scalar> y(out_shape, -std::numeric_limits<Scalar>::infinity());
  argmax_.assign(out_shape.size(), 0);
  const auto in = x.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t oh = 0; oh < ph.out; ++oh) {
      const std::ptrdiff_t h0 = static_cast<std::ptrdiff_t>(oh) * stride - static_cast<std::ptrdiff_t>(ph.before);
      const std::ptrdiff_t i_lo = std::max<std::ptrdiff_t>(0, h0);
      const std::ptrdiff_t i_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(s.h), h0 + kh);
      for (std::size_t ow = 0; ow < pw.out; ++ow) {
        const std::ptrdiff_t w0 = static_cast<std::ptrdiff_t>(ow) * stride - static_cast<std::ptrdiff_t>(pw.before);
        const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, w0);
        const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(s.w), w0 + kw);
        const std::size_t out_base = ((n * ph.out + oh) * pw.out + ow) * C;
        Scalar* best = y.data().data() + out_base;
        std::size_t* arg = argmax_.data() + out_base;
        const std::size_t first = ((n * s.h + static_cast<std::size_t>(i_lo)) * s.w +
                                   static_cast<std::size_t>(j_lo)) * C;
        for (std::size_t c = 0; c < C; ++c) arg[c] = first + c;
        for (std::ptrdiff_t i = i_lo; i < i_hi; ++i) {
          for (std::ptrdiff_t j = j_lo; j < j_hi; ++j) {
            const std::size_t base = ((n * s.h + static_cast<std::size_t>(i)) * s.w +
                                      static_cast<std::size_t>(j)) * C;
            const Scalar* v = in.data() + base;
            for (std::size_t c = 0; c < C; ++c) {
              const bool greater = v[c] > best[c];
              best[c] = greater ? v[c] : best[c];
              arg[c] = greater ? base + c : arg[c];
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor4<Scalar> MaxPool2d<Scalar>::backward(const Tensor4<Scalar>& dy) {
  if (dy.size() != argmax_.size()) throw ShapeError("max_pool2d backward: gradient shape mismatch");
  Tensor4<Scalar> dx(in_shape_);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
  return dx;
}

// --------------------------------------------------------------- Dropout

template <typename Scalar>
Tensor4<Scalar> Dropout<Scalar>::forward(const Tensor4<Scalar>& x, Mode mode) {
  const double rate = this->spec().rate;
  if (mode == Mode::kInference || rate == 0.0) {
    mask_.clear();
    return x;
  }
  const auto scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  mask_.resize(x.size());
  Tensor4<Scalar> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = rng_.uniform() >= rate ? scale : Scalar(0);
    y[i] = x[i] * mask_[i];
  }
  return y;
}

template <typename Scalar>
Tensor4<Scalar> Dropout<Scalar>::backward(const Tensor4<Scalar>& dy) {
  if (mask_.empty()) return dy;
  if (dy.size() != mask_.size()) throw ShapeError("dropout backward: gradient shape mismatch");
  Tensor4<Scalar> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
  return dx;
}

// --------------------------------------------------------------- Flatten

template <typename Scalar>
Tensor4<Scalar> Flatten<Scalar>::forward(const Tensor4<Scalar>& x, Mode /*mode*/) {
  in_shape_ = x.shape();
  return x.reshaped(output_shape(this->spec(), x.shape()));
}

template <typename Scalar>
Tensor4<Scalar> Flatten<Scalar>::backward(const Tensor4<Scalar>& dy) {
  return dy.reshaped(in_shape_);
}

// ----------------------------------------------------------------- Dense

template <typename Scalar>
Dense<Scalar>::Dense(const LayerSpec& spec, std::size_t in_features, std::uint64_t seed)
    : Layer<Scalar>(spec), in_features_(in_features) {
  spec.validate();
  const auto out = static_cast<std::size_t>(spec.units);
  kernel_ = make_parameter<Scalar>("kernel", in_features * out, Scalar(0));
  bias_ = make_parameter<Scalar>("bias", out, Scalar(0));
  glorot_uniform(kernel_.value, in_features, out, seed);
}

template <typename Scalar>
Tensor4<Scalar> Dense<Scalar>::forward(const Tensor4<Scalar>& x, Mode mode) {
  const auto& s = x.shape();
  if (s.h != 1 || s.w != 1 || s.c != in_features_) {
    throw ShapeError("dense: expected (n, 1, 1, " + std::to_string(in_features_) + "), got " +
                     to_string(s));
  }
  const auto units = static_cast<Eigen::Index>(this->spec().units);
  const auto N = static_cast<Eigen::Index>(s.n);
  const auto F = static_cast<Eigen::Index>(in_features_);
  Tensor4<Scalar> y(Shape4{s.n, 1, 1, static_cast<std::size_t>(units)});
  ConstMatMap<Scalar> in(x.data().data(), N, F);
  ConstMatMap<Scalar> weights(kernel_.value.data(), F, units);
  MatMap<Scalar> out(y.data().data(), N, units);
  if (mode == Mode::kInference) {
    // Row by row, so a sample's scores do not depend on its batch.
    for (Eigen::Index n = 0; n < N; ++n) out.row(n).noalias() = in.row(n) * weights;
  } else {
    out.noalias() = in * weights;
  }
  out.rowwise() += Eigen::Map<const RowVec<Scalar>>(bias_.value.data(), units);
  input_ = x;
  return y;
}

template <typename Scalar>
Tensor4<Scalar> Dense<Scalar>::backward(const Tensor4<Scalar>& dy) {
  const auto units = static_cast<Eigen::Index>(this->spec().units);
  const auto N = static_cast<Eigen::Index>(input_.shape().n);
  const auto F = static_cast<Eigen::Index>(in_features_);
  expect_shape(dy.shape(), Shape4{input_.shape().n, 1, 1, static_cast<std::size_t>(units)},
               "dense backward");
  ConstMatMap<Scalar> in(input_.data().data(), N, F);
  ConstMatMap<Scalar> grad_out(dy.data().data(), N, units);
  ConstMatMap<Scalar> weights(kernel_.value.data(), F, units);
  MatMap<Scalar>(kernel_.grad.data(), F, units).noalias() = in.transpose() * grad_out;
  std::fill(bias_.grad.begin(), bias_.grad.end(), Scalar(0));
  add_column_sums(grad_out.data(), static_cast<std::size_t>(N), static_cast<std::size_t>(units),
                  bias_.grad.data());
  Tensor4<Scalar> dx(input_.shape());
  MatMap<Scalar>(dx.data().data(), N, F).noalias() = grad_out * weights.transpose();
  return dx;
}

// ----------------------------------------------------------- Activations

template <typename Scalar>
Tensor4<Scalar> Relu<Scalar>::forward(const Tensor4<Scalar>& x, Mode /*mode*/) {
  input_ = x;
  Tensor4<Scalar> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > Scalar(0) ? x[i] : Scalar(0);
  return y;
}

template <typename Scalar>
Tensor4<Scalar> Relu<Scalar>::backward(const Tensor4<Scalar>& dy) {
  expect_shape(dy.shape(), input_.shape(), "relu backward");
  Tensor4<Scalar> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = input_[i] > Scalar(0) ? dy[i] : Scalar(0);
  return dx;
}

template <typename Scalar>
Tensor4<Scalar> Softmax<Scalar>::forward(const Tensor4<Scalar>& x, Mode /*mode*/) {
  const std::size_t C = x.shape().c;
  Tensor4<Scalar> y(x.shape());
  for (std::size_t base = 0; base < x.size(); base += C) {
    Scalar peak = x[base];
    for (std::size_t c = 1; c < C; ++c) peak = std::max(peak, x[base + c]);
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double e = std::exp(static_cast<double>(x[base + c] - peak));
      y[base + c] = static_cast<Scalar>(e);
      total += e;
    }
    for (std::size_t c = 0; c < C; ++c) y[base + c] = static_cast<Scalar>(y[base + c] / total);
  }
  output_ = y;
  return y;
}

template <typename Scalar>
Tensor4<Scalar> Softmax<Scalar>::backward(const Tensor4<Scalar>& dy) {
  expect_shape(dy.shape(), output_.shape(), "softmax backward");
  const std::size_t C = dy.shape().c;
  Tensor4<Scalar> dx(dy.shape());
  for (std::size_t base = 0; base < dy.size(); base += C) {
    double dot = 0.0;
    for (std::size_t c = 0; c < C; ++c) dot += static_cast<double>(dy[base + c]) * output_[base + c];
    for (std::size_t c = 0; c < C; ++c) {
      dx[base + c] = static_cast<Scalar>(output_[base + c] * (dy[base + c] - dot));
    }
  }
  return dx;
}

template <typename Scalar>
Tensor4<Scalar> Sigmoid<Scalar>::forward(const Tensor4<Scalar>& x, Mode /*mode*/) {
  Tensor4<Scalar> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = static_cast<Scalar>(v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                        : std::exp(v) / (1.0 + std::exp(v)));
  }
  output_ = y;
  return y;
}

template <typename Scalar>
Tensor4<Scalar> Sigmoid<Scalar>::backward(const Tensor4<Scalar>& dy) {
  expect_shape(dy.shape(), output_.shape(), "sigmoid backward");
  Tensor4<Scalar> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) {
    dx[i] = dy[i] * output_[i] * (Scalar(1) - output_[i]);
  }
  return dx;
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> make_layer(const LayerSpec& spec, const Shape4& in,
                                          std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::kConv2d: return std::make_unique<Conv2d<Scalar>>(spec, in.c, seed);
    case LayerKind::kBatchNorm: return std::make_unique<BatchNorm<Scalar>>(spec, in.c);
    case LayerKind::kMaxPool2d: return std::make_unique<MaxPool2d<Scalar>>(spec);
    case LayerKind::kDropout: return std::make_unique<Dropout<Scalar>>(spec, seed);
    case LayerKind::kFlatten: return std::make_unique<Flatten<Scalar>>(spec);
    case LayerKind::kDense:
      if (in.h != 1 || in.w != 1) {
        throw ShapeError("dense: expects flattened input, got " + to_string(in));
      }
      return std::make_unique<Dense<Scalar>>(spec, in.c, seed);
    case LayerKind::kRelu: return std::make_unique<Relu<Scalar>>(spec);
    case LayerKind::kSoftmax: return std::make_unique<Softmax<Scalar>>(spec);
    case LayerKind::kSigmoid: return std::make_unique<Sigmoid<Scalar>>(spec);
  }
  throw ConfigError("unknown layer kind");
}

#define CITYSOUND_INSTANTIATE_LAYERS(T)                                                    \
  template class Conv2d<T>;                                                                \
  template class BatchNorm<T>;                                                             \
  template class MaxPool2d<T>;                                                             \
  template class Dropout<T>;                                                               \
  template class Flatten<T>;                                                               \
  template class Dense<T>;                                                                 \
  template class Relu<T>;                                                                  \
  template class Softmax<T>;                                                               \
  template class Sigmoid<T>;                                                               \
  template std::unique_ptr<Layer<T>> make_layer<T>(const LayerSpec&, const Shape4&, std::uint64_t);

CITYSOUND_INSTANTIATE_LAYERS(float)
CITYSOUND_INSTANTIATE_LAYERS(double)

#undef CITYSOUND_INSTANTIATE_LAYERS

}  // namespace citysound::nnet
