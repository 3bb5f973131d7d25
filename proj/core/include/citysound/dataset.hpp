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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "citysound/vocabulary.hpp"

namespace citysound::dataset {

// Metadata carried by every corpus clip, derived from its DCASE filename
// `<scene>-<city>-<location>-<segment>-<device>.wav`.
struct ClipMeta {
  std::string id;  // filename stem
  Scene scene = Scene::kAirport;
  City city = City::kBarcelona;
  int location_id = 0;
  int segment_id = 0;
  std::string device;
  std::filesystem::path path;

  friend bool operator==(const ClipMeta&, const ClipMeta&) = default;
};

// Mono waveform in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;
  std::optional<ClipMeta> meta;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

struct DatasetSplit {
  std::vector<ClipMeta> train;
  std::vector<ClipMeta> validation;
  std::vector<ClipMeta> test;
};

struct SplitFractions {
  double train = 0.7;
  double validation = 0.15;
  double test = 0.15;
};

ClipMeta parse_clip_name(std::string_view filename);

// Inverse of parse_clip_name: `<scene>-<city>-<loc>-<seg>-<dev>.wav`.
std::string format_clip_name(Scene scene, City city, int location_id,
                             int segment_id, std::string_view device);

// Reads a tab-separated manifest. Column 1 is a path relative to
// `audio_root`; an optional column 2 holds the scene label and must agree
// with the filename. A leading header row (first cell "filename") is
// skipped. With `require_files`, every referenced clip must exist.
std::vector<ClipMeta> load_manifest(const std::filesystem::path& manifest,
                                    const std::filesystem::path& audio_root,
                                    bool require_files = false);

std::vector<ClipMeta> parse_manifest(std::string_view contents,
                                     const std::filesystem::path& audio_root);

// Uses externally supplied split lists (e.g. the challenge's own train /
// evaluate / test files) instead of re-splitting.
DatasetSplit load_split_lists(const std::filesystem::path& train_list,
                              const std::filesystem::path& validation_list,
                              const std::filesystem::path& test_list,
                              const std::filesystem::path& audio_root,
                              bool require_files = false);

// Per-(scene, city) stratified split. Counts per stratum follow the largest
// remainder rule with ties going to the earlier split (train, validation,
// test). Each output list preserves input order.
DatasetSplit stratified_split(std::span<const ClipMeta> clips,
                              const SplitFractions& fractions,
                              std::uint64_t seed);

// Largest-remainder apportionment of `n` items over the three fractions.
std::array<std::size_t, 3> stratum_counts(std::size_t n,
                                          const SplitFractions& fractions);

}  // namespace citysound::dataset
