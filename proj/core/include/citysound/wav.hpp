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
#include <filesystem>
#include <span>
#include <vector>

#include "citysound/dataset.hpp"

namespace citysound::dataset {

// RIFF/WAVE PCM decoding. 16- and 24-bit integer samples, one or two
// channels; stereo is averaged to mono and codes are divided by 2^(bits-1).
AudioClip decode_wav(const std::filesystem::path& path);
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

// Encodes interleaved samples in [-1, 1] as integer PCM, rounding to the
// nearest code and saturating at full scale.
std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved,
                                     int channels, int sample_rate, int bits);

void write_wav(const std::filesystem::path& path,
               std::span<const float> interleaved, int channels,
               int sample_rate, int bits);

}  // namespace citysound::dataset
