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

#include "citysound/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "citysound/errors.hpp"
#include "citysound/rng.hpp"

namespace citysound::dataset {

void SynthConfig::validate() const {
  if (n_clips_per_city_scene < 1) throw ConfigError("synth: clip count must be >= 1");
  if (!(duration_s > 0.0)) throw ConfigError("synth: duration must be positive");
  if (sample_rate < 1) throw ConfigError("synth: sample rate must be >= 1");
  if (!(noise_level >= 0.0)) throw ConfigError("synth: noise level must be >= 0");
  if (!(amplitude > 0.0) || amplitude > 1.0) {
    throw ConfigError("synth: amplitude must lie in (0, 1]");
  }
  if (!(modulation_depth >= 0.0) || modulation_depth > 1.0) {
    throw ConfigError("synth: modulation depth must lie in [0, 1]");
  }
  const double nyquist = sample_rate / 2.0;
  for (double f : city_peak_hz) {
    if (!(f > 0.0) || f >= nyquist) {
      throw ConfigError("synth: city peak frequencies must lie in (0, sample_rate/2)");
    }
  }
  for (double r : scene_am_hz) {
    if (!(r >= 0.0) || r >= nyquist) {
      throw ConfigError("synth: modulation rates must lie in [0, sample_rate/2)");
    }
  }
}

SynthDataset synthesize_dataset(const SynthConfig& config) {
  config.validate();
  const auto n_samples = static_cast<std::size_t>(
      std::llround(config.duration_s * config.sample_rate));
  const double two_pi = 2.0 * std::numbers::pi;
  const double dt = 1.0 / config.sample_rate;
  const double gain = config.amplitude / (1.0 + config.modulation_depth);

  SynthDataset out;
  const std::size_t total =
      kNumScenes * kNumCities * static_cast<std::size_t>(config.n_clips_per_city_scene);
  out.clips.reserve(total);
  out.metas.reserve(total);

  int segment = 0;
  for (Scene scene : kAllScenes) {
    const double rate = config.scene_am_hz[index_of(scene)];
    for (City city : kAllCities) {
      const double freq = config.city_peak_hz[index_of(city)];
      for (int k = 0; k < config.n_clips_per_city_scene; ++k, ++segment) {
        ClipMeta meta = parse_clip_name(format_clip_name(scene, city, k, segment, "s"));
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(segment)));
        AudioClip clip;
        clip.sample_rate = config.sample_rate;
        clip.samples.resize(n_samples);
        for (std::size_t i = 0; i < n_samples; ++i) {
          const double t = static_cast<double>(i) * dt;
          const double envelope = 1.0 + config.modulation_depth * std::sin(two_pi * rate * t);
          double x = gain * envelope * std::sin(two_pi * freq * t);
          if (config.noise_level > 0.0) x += config.noise_level * rng.normal();
          clip.samples[i] = static_cast<float>(std::clamp(x, -1.0, 1.0));
        }
        clip.meta = meta;
        out.clips.push_back(std::move(clip));
        out.metas.push_back(std::move(meta));
      }
    }
  }
  return out;
}

}  // namespace citysound::dataset
