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

#include <filesystem>

#include "citysound/features.hpp"

namespace citysound::features {

// Binary layout, all integers little-endian:
//   "CSFM" | version u32 | n_frames u32 | n_bins u32 | reserved u64
//   | n_frames * n_bins float32 LE, row-major
inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr std::size_t kCacheHeaderBytes = 24;

void cache_write(const FeatureMatrix& fm, const std::filesystem::path& path);
// Throws FormatError on a bad magic, unknown version or truncated payload.
FeatureMatrix cache_read(const std::filesystem::path& path);

std::vector<std::uint8_t> cache_encode(const FeatureMatrix& fm);
FeatureMatrix cache_decode(std::span<const std::uint8_t> bytes);

// Statistics persist as a 2 x n_bins cache matrix: row 0 mean, row 1 std.
void write_norm_stats(const NormStats& stats, const std::filesystem::path& path);
NormStats read_norm_stats(const std::filesystem::path& path);

}  // namespace citysound::features
