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

#include "citysound/features.hpp"

#include <algorithm>
#include <complex>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "citysound/errors.hpp"

namespace citysound::features {
namespace {

// numpy-style "reflect" indexing (edge sample not repeated), repeated as
// often as needed for short signals.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t length) {
  if (length == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (length - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(length)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

void StftConfig::validate() const {
  if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) {
    throw ConfigError("stft: n_fft must be a power of two >= 2");
  }
  if (hop < 1 || hop > n_fft) throw ConfigError("stft: hop must lie in [1, n_fft]");
}

std::size_t StftConfig::n_frames(std::size_t length) const {
  const auto h = static_cast<std::size_t>(hop);
  if (centered) return 1 + length / h;
  const auto n = static_cast<std::size_t>(n_fft);
  return length >= n ? 1 + (length - n) / h : 1;
}

void MelConfig::validate() const {
  if (n_mels < 2) throw ConfigError("mel: n_mels must be >= 2");
  if (sample_rate < 1) throw ConfigError("mel: sample rate must be positive");
  const double hi = upper_hz();
  if (!(f_min >= 0.0) || !(f_min < hi) || hi > sample_rate / 2.0) {
    throw ConfigError("mel: need 0 <= f_min < f_max <= sample_rate/2");
  }
}

std::vector<double> analysis_window(WindowKind kind, int length) {
  std::vector<double> w(static_cast<std::size_t>(length), 1.0);
  if (kind == WindowKind::kHann) {
    // Periodic Hann, the DFT-even form used for spectral analysis.
    for (int n = 0; n < length; ++n) {
      w[static_cast<std::size_t>(n)] =
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
    }
  }
  return w;
}

RealMatrix stft_magnitude(std::span<const float> samples, const StftConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw EmptyInputError("stft: empty signal");

  const auto n_fft = static_cast<std::size_t>(cfg.n_fft);
  const auto n_bins = static_cast<std::size_t>(cfg.n_bins());
  const std::size_t n_frames = cfg.n_frames(samples.size());
  const std::ptrdiff_t offset = cfg.centered ? static_cast<std::ptrdiff_t>(n_fft / 2) : 0;
  const auto window = analysis_window(cfg.window, cfg.n_fft);

  Eigen::FFT<double> fft;
  std::vector<double> frame(n_fft);
  std::vector<std::complex<double>> spectrum;
  RealMatrix mag(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(n_bins));

  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * cfg.hop - offset;
    for (std::size_t n = 0; n < n_fft; ++n) {
      const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(n);
      double x;
      if (cfg.centered) {
        x = samples[reflect_index(i, samples.size())];
      } else {
        x = i < static_cast<std::ptrdiff_t>(samples.size()) ? samples[static_cast<std::size_t>(i)] : 0.0;
      }
      frame[n] = x * window[n];
    }
    fft.fwd(spectrum, frame);
    for (std::size_t k = 0; k < n_bins; ++k) {
      mag(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = std::abs(spectrum[k]);
    }
  }
  return mag;
}

RealMatrix stft_magnitude(const dataset::AudioClip& clip, const StftConfig& cfg) {
  return stft_magnitude(std::span<const float>(clip.samples), cfg);
}

RealMatrix mel_filterbank(const MelConfig& cfg, int n_fft) {
  cfg.validate();
  if (n_fft < 2) throw ConfigError("mel: n_fft must be >= 2");
  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.upper_hz());

  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                    static_cast<double>(cfg.n_mels + 1);
    edges[i] = mel_to_hz(mel);
  }

  RealMatrix fb = RealMatrix::Zero(cfg.n_mels, n_bins);
  const double bin_hz = static_cast<double>(cfg.sample_rate) / n_fft;
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double centre = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    bool any = false;
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      const double w = std::min((f - lo) / (centre - lo), (hi - f) / (hi - centre));
      if (w > 0.0) {
        fb(m, k) = w;
        any = true;
      }
    }
    if (!any) {
      throw ResolutionError("mel: filter " + std::to_string(m) +
                            " covers no FFT bin; reduce n_mels or raise n_fft");
    }
  }
  return fb;
}

FeatureMatrix log_mel(const RealMatrix& magnitude, const RealMatrix& filterbank) {
  if (magnitude.cols() != filterbank.cols()) {
    throw ShapeError("log_mel: magnitude has " + std::to_string(magnitude.cols()) +
                     " bins, filterbank expects " + std::to_string(filterbank.cols()));
  }
  const RealMatrix energy = magnitude.array().square().matrix() * filterbank.transpose();
  FeatureMatrix out;
  out.values = (energy.array() + kLogFloor).log().cast<float>();
  return out;
}

void NormAccumulator::add(const FeatureMatrix& fm) {
  const auto n_bins = fm.n_bins();
  const auto n = fm.n_frames();
  if (n == 0) return;
  if (mean_.empty()) {
    mean_.assign(n_bins, 0.0);
    m2_.assign(n_bins, 0.0);
  } else if (mean_.size() != n_bins) {
    throw ShapeError("norm stats: matrices disagree on bin count");
  }
  const double nb = static_cast<double>(n);
  const double na = static_cast<double>(count_);
  const double total = na + nb;
  for (std::size_t b = 0; b < n_bins; ++b) {
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) sum += fm.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b));
    const double mean_b = sum / nb;
    double m2_b = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double d = fm.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b)) - mean_b;
      m2_b += d * d;
    }
    const double delta = mean_b - mean_[b];
    mean_[b] += delta * nb / total;
    m2_[b] += m2_b + delta * delta * na * nb / total;
  }
  count_ += n;
}

NormStats NormAccumulator::finish() const {
  if (count_ < 2) throw EmptyInputError("norm stats: need at least 2 training frames");
  NormStats stats;
  stats.mean = mean_;
  stats.std.resize(mean_.size());
  for (std::size_t b = 0; b < mean_.size(); ++b) {
    stats.std[b] = std::max(std::sqrt(m2_[b] / static_cast<double>(count_)), kStdFloor);
  }
  return stats;
}

NormStats fit_norm_stats(std::span<const FeatureMatrix> training) {
  if (training.empty()) throw EmptyInputError("norm stats: empty training collection");
  NormAccumulator acc;
  for (const auto& fm : training) acc.add(fm);
  return acc.finish();
}

FeatureMatrix normalize(const FeatureMatrix& fm, const NormStats& stats) {
  if (fm.n_bins() != stats.n_bins() || stats.std.size() != stats.mean.size()) {
    throw ShapeError("normalize: feature has " + std::to_string(fm.n_bins()) +
                     " bins, stats have " + std::to_string(stats.n_bins()));
  }
  FeatureMatrix out;
  out.values.resize(fm.values.rows(), fm.values.cols());
  for (Eigen::Index t = 0; t < fm.values.rows(); ++t) {
    for (Eigen::Index b = 0; b < fm.values.cols(); ++b) {
      const auto bi = static_cast<std::size_t>(b);
      out.values(t, b) = static_cast<float>(
          (static_cast<double>(fm.values(t, b)) - stats.mean[bi]) / stats.std[bi]);
    }
  }
  return out;
}

FeatureMatrix smooth_time(const FeatureMatrix& fm, int window) {
  if (window < 1 || window % 2 == 0) {
    throw ConfigError("smooth_time: window must be odd and >= 1, got " + std::to_string(window));
  }
  if (window == 1) return fm;
  const Eigen::Index n = fm.values.rows();
  const Eigen::Index half = window / 2;
  FeatureMatrix out;
  out.values.resize(n, fm.values.cols());
  std::vector<double> prefix(static_cast<std::size_t>(n) + 1);
  for (Eigen::Index b = 0; b < fm.values.cols(); ++b) {
    prefix[0] = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      prefix[static_cast<std::size_t>(t) + 1] = prefix[static_cast<std::size_t>(t)] + fm.values(t, b);
    }
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
      const Eigen::Index hi = std::min<Eigen::Index>(n - 1, t + half);
      const double sum = prefix[static_cast<std::size_t>(hi) + 1] - prefix[static_cast<std::size_t>(lo)];
      out.values(t, b) = static_cast<float>(sum / static_cast<double>(hi - lo + 1));
    }
  }
  return out;
}

MelConfig FeatureConfig::mel(int sample_rate) const {
  MelConfig m;
  m.n_mels = n_mels;
  m.f_min = f_min;
  m.f_max = f_max;
  m.sample_rate = sample_rate;
  return m;
}

LogMelExtractor::LogMelExtractor(FeatureConfig config) : config_(std::move(config)) {
  config_.stft.validate();
}

FeatureMatrix LogMelExtractor::extract(const dataset::AudioClip& clip) {
  if (clip.sample_rate != cached_rate_) {
    filterbank_ = mel_filterbank(config_.mel(clip.sample_rate), config_.stft.n_fft);
    cached_rate_ = clip.sample_rate;
  }
  return log_mel(stft_magnitude(clip, config_.stft), filterbank_);
}

FeatureMatrix stats_input(const FeatureMatrix& raw, const FeatureConfig& config) {
  if (config.order == PipelineOrder::kSmoothThenNormalize) {
    return smooth_time(raw, config.smooth_window);
  }
  return raw;
}

FeatureMatrix finalize(const FeatureMatrix& raw, const NormStats& stats,
                       const FeatureConfig& config) {
  if (config.order == PipelineOrder::kSmoothThenNormalize) {
    return normalize(smooth_time(raw, config.smooth_window), stats);
  }
  return smooth_time(normalize(raw, stats), config.smooth_window);
}

}  // namespace citysound::features
