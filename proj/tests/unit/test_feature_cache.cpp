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


#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "citysound/errors.hpp"
#include "citysound/feature_cache.hpp"
#include "test_support.hpp"

namespace citysound::features {
namespace {

FeatureMatrix random_matrix(Eigen::Index frames, Eigen::Index bins, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> d(-30.0f, 5.0f);
  FeatureMatrix fm;
  fm.values.resize(frames, bins);
  for (Eigen::Index i = 0; i < fm.values.size(); ++i) fm.values.data()[i] = d(gen);
  return fm;
}

TEST(FeatureCache, RoundTripBitExact) {
  testing::TempDir dir("cs-cache");
  const FeatureMatrix fm = random_matrix(37, 11, 1);
  cache_write(fm, dir / "a.csfm");
  const FeatureMatrix back = cache_read(dir / "a.csfm");
  ASSERT_EQ(back.n_frames(), 37u);
  ASSERT_EQ(back.n_bins(), 11u);
  EXPECT_EQ(std::memcmp(back.values.data(), fm.values.data(), sizeof(float) * 37 * 11), 0);
}

TEST(FeatureCache, FileSize) {
  testing::TempDir dir("cs-cache");
  cache_write(random_matrix(938, 128, 2), dir / "b.csfm");
  EXPECT_EQ(std::filesystem::file_size(dir / "b.csfm"), 24u + 938u * 128u * 4u);
  EXPECT_EQ(kCacheHeaderBytes, 24u);
}

TEST(FeatureCache, HeaderLayout) {
  const auto bytes = cache_encode(random_matrix(3, 2, 3));
  ASSERT_EQ(bytes.size(), 24u + 24u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CSFM");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 3);
  EXPECT_EQ(bytes[12], 2);
}

TEST(FeatureCache, Corruption) {
  auto bytes = cache_encode(random_matrix(4, 4, 4));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(cache_decode(truncated), FormatError);
  EXPECT_THROW(cache_decode(std::span<const std::uint8_t>(bytes.data(), 10)), FormatError);
  auto magic = bytes;
  magic[1] = 'X';
  EXPECT_THROW(cache_decode(magic), FormatError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(cache_decode(version), FormatError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(cache_decode(extra), FormatError);
  EXPECT_THROW(cache_read("/nonexistent/c.csfm"), MissingFileError);
}

TEST(FeatureCache, NormStatsRoundTrip) {
  testing::TempDir dir("cs-cache");
  NormStats s{{1.5, -2.25, 3.0}, {0.5, 1e-8, 2.0}};
  write_norm_stats(s, dir / "s.csfm");
  const FeatureMatrix raw = cache_read(dir / "s.csfm");
  EXPECT_EQ(raw.n_frames(), 2u);
  EXPECT_EQ(raw.n_bins(), 3u);
  const NormStats back = read_norm_stats(dir / "s.csfm");
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(back.mean[b], static_cast<double>(static_cast<float>(s.mean[b])));
    EXPECT_EQ(back.std[b], std::max(static_cast<double>(static_cast<float>(s.std[b])), kStdFloor));
  }
  EXPECT_GE(back.std[1], kStdFloor);
}

}  // namespace
}  // namespace citysound::features
