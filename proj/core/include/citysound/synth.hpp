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

#include <array>
#include <cstdint>
#include <vector>

#include "citysound/dataset.hpp"

namespace citysound::dataset {

// Desk-scale labelled soundscapes. Each clip is a sine at its city's peak
// frequency, amplitude-modulated at its scene's rate, plus Gaussian noise:
//
//   x(t) = amplitude * (1 + depth * sin(2 pi r_scene t)) / (1 + depth)
//                    * sin(2 pi f_city t) + noise_level * N(0, 1)
//
// clipped to [-1, 1].
struct SynthConfig {
  int n_clips_per_city_scene = 10;
  double duration_s = 2.0;
  int sample_rate = 16000;
  std::array<double, kNumCities> city_peak_hz = {400.0,  700.0,  1100.0,
                                                 1600.0, 2300.0, 3200.0};
  // Kept under the 25-frame smoothing cut-off at the default hop.
  std::array<double, kNumScenes> scene_am_hz = {0.1, 0.2, 0.3, 0.4, 0.5,
                                                0.6, 0.7, 0.8, 0.9, 1.0};
  double noise_level = 0.01;
  double amplitude = 0.5;
  double modulation_depth = 0.8;
  std::uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
};

struct SynthDataset {
  std::vector<AudioClip> clips;
  std::vector<ClipMeta> metas;  // metas[i] == *clips[i].meta
};

// Clips ordered scene-major, then city, then repetition. Every clip has its
// own noise stream derived from (seed, clip index).
SynthDataset synthesize_dataset(const SynthConfig& config);

}  // namespace citysound::dataset
