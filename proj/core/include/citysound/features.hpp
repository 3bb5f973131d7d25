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

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "citysound/dataset.hpp"

namespace citysound::features {

using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kLogFloor = 1e-10;
inline constexpr double kStdFloor = 1e-8;

enum class WindowKind { kHann, kRectangular };

struct StftConfig {
  int n_fft = 2048;
  int hop = 512;
  WindowKind window = WindowKind::kHann;
  bool centered = true;

  void validate() const;
  int n_bins() const { return n_fft / 2 + 1; }
  // Frames produced for a signal of `length` samples.
  std::size_t n_frames(std::size_t length) const;
};

struct MelConfig {
  int n_mels = 128;
  double f_min = 0.0;
  std::optional<double> f_max;  // defaults to sample_rate / 2
  int sample_rate = 48000;

  double upper_hz() const { return f_max.value_or(sample_rate / 2.0); }
  void validate() const;
};

// Rows are time frames, columns mel bins.
struct FeatureMatrix {
  FloatMatrix values;

  std::size_t n_frames() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_bins() const { return static_cast<std::size_t>(values.cols()); }
};

// Per-bin statistics pooled over every frame of the training features.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // population std, floored at kStdFloor

  std::size_t n_bins() const { return mean.size(); }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> analysis_window(WindowKind kind, int length);

// Magnitude of the one-sided DFT of each windowed frame, frames x (n_fft/2+1).
// Centered framing reflect-pads n_fft/2 samples on each side, giving
// 1 + floor(len / hop) frames. Throws EmptyInputError for empty input.
RealMatrix stft_magnitude(std::span<const float> samples, const StftConfig& cfg);
RealMatrix stft_magnitude(const dataset::AudioClip& clip, const StftConfig& cfg);

// Peak-normalised triangular filters, n_mels x (n_fft/2+1), with centres
// equally spaced on the HTK mel scale between f_min and f_max. Throws
// ResolutionError when any filter covers no FFT bin.
RealMatrix mel_filterbank(const MelConfig& cfg, int n_fft);

// values = ln((mag^2) * fb^T + kLogFloor).
FeatureMatrix log_mel(const RealMatrix& magnitude, const RealMatrix& filterbank);

// Streaming version of fit_norm_stats; per-matrix two-pass moments are
// merged in insertion order, so the result does not depend on how the
// matrices are batched.
class NormAccumulator {
 public:
  void add(const FeatureMatrix& fm);
  std::size_t frames() const { return count_; }
  NormStats finish() const;

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

NormStats fit_norm_stats(std::span<const FeatureMatrix> training);

// (x - mean[b]) / std[b] per bin. Throws ShapeError on a bin-count mismatch.
FeatureMatrix normalize(const FeatureMatrix& fm, const NormStats& stats);

// Centered moving average along time; windows truncate at the edges.
// Throws ConfigError for an even or non-positive window.
FeatureMatrix smooth_time(const FeatureMatrix& fm, int window = 25);

enum class PipelineOrder { kNormalizeThenSmooth, kSmoothThenNormalize };

struct FeatureConfig {
  StftConfig stft;
  int n_mels = 128;
  double f_min = 0.0;
  std::optional<double> f_max;
  int smooth_window = 25;
  PipelineOrder order = PipelineOrder::kNormalizeThenSmooth;

  MelConfig mel(int sample_rate) const;
};

// Raw log-mel extraction with the filterbank and window cached per sample
// rate.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(FeatureConfig config);

  FeatureMatrix extract(const dataset::AudioClip& clip);
  const FeatureConfig& config() const { return config_; }

 private:
  FeatureConfig config_;
  int cached_rate_ = 0;
  RealMatrix filterbank_;
};

// Representation the statistics are fitted on: raw log-mel, or smoothed
// log-mel when smoothing runs first.
FeatureMatrix stats_input(const FeatureMatrix& raw, const FeatureConfig& config);

// Final network input: normalisation and smoothing in the configured order.
FeatureMatrix finalize(const FeatureMatrix& raw, const NormStats& stats,
                       const FeatureConfig& config);

}  // namespace citysound::features
