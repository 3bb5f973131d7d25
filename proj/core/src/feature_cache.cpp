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

#include "citysound/feature_cache.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "citysound/errors.hpp"

namespace citysound::features {
namespace {

constexpr char kMagic[4] = {'C', 'S', 'F', 'M'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace

std::vector<std::uint8_t> cache_encode(const FeatureMatrix& fm) {
  const auto rows = static_cast<std::uint32_t>(fm.values.rows());
  const auto cols = static_cast<std::uint32_t>(fm.values.cols());
  std::vector<std::uint8_t> out;
  out.reserve(kCacheHeaderBytes + static_cast<std::size_t>(rows) * cols * 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kCacheVersion);
  put_u32(out, rows);
  put_u32(out, cols);
  for (int i = 0; i < 8; ++i) out.push_back(0);  // reserved
  for (Eigen::Index t = 0; t < fm.values.rows(); ++t) {
    for (Eigen::Index b = 0; b < fm.values.cols(); ++b) {
      put_u32(out, std::bit_cast<std::uint32_t>(fm.values(t, b)));
    }
  }
  return out;
}

FeatureMatrix cache_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCacheHeaderBytes) throw FormatError("feature cache: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("feature cache: bad magic");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kCacheVersion) {
    throw FormatError("feature cache: unsupported version " + std::to_string(version));
  }
  const std::uint32_t rows = get_u32(bytes.data() + 8);
  const std::uint32_t cols = get_u32(bytes.data() + 12);
  const std::size_t payload = static_cast<std::size_t>(rows) * cols * 4;
  if (bytes.size() != kCacheHeaderBytes + payload) {
    throw FormatError("feature cache: expected " + std::to_string(kCacheHeaderBytes + payload) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  FeatureMatrix fm;
  fm.values.resize(rows, cols);
  const std::uint8_t* p = bytes.data() + kCacheHeaderBytes;
  for (std::uint32_t t = 0; t < rows; ++t) {
    for (std::uint32_t b = 0; b < cols; ++b, p += 4) {
      fm.values(t, b) = std::bit_cast<float>(get_u32(p));
    }
  }
  return fm;
}

void cache_write(const FeatureMatrix& fm, const std::filesystem::path& path) {
  write_bytes(path, cache_encode(fm));
}

FeatureMatrix cache_read(const std::filesystem::path& path) {
  try {
    return cache_decode(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_norm_stats(const NormStats& stats, const std::filesystem::path& path) {
  FeatureMatrix fm;
  fm.values.resize(2, static_cast<Eigen::Index>(stats.n_bins()));
  for (std::size_t b = 0; b < stats.n_bins(); ++b) {
    fm.values(0, static_cast<Eigen::Index>(b)) = static_cast<float>(stats.mean[b]);
    fm.values(1, static_cast<Eigen::Index>(b)) = static_cast<float>(stats.std[b]);
  }
  cache_write(fm, path);
}

NormStats read_norm_stats(const std::filesystem::path& path) {
  const FeatureMatrix fm = cache_read(path);
  if (fm.values.rows() != 2) throw FormatError(path.string() + ": stats file must have 2 rows");
  NormStats stats;
  for (Eigen::Index b = 0; b < fm.values.cols(); ++b) {
    stats.mean.push_back(fm.values(0, b));
    stats.std.push_back(std::max<double>(fm.values(1, b), kStdFloor));
  }
  return stats;
}

}  // namespace citysound::features
