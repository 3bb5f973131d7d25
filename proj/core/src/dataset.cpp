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

#include "citysound/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include "citysound/errors.hpp"
#include "citysound/rng.hpp"

namespace citysound::dataset {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

int parse_nonnegative(std::string_view token, std::string_view what,
                      std::string_view filename) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value < 0) {
    throw FormatError("'" + std::string(filename) + "': " + std::string(what) +
                      " field '" + std::string(token) + "' is not an integer");
  }
  return value;
}

std::string_view basename(std::string_view path) {
  const std::size_t slash = path.find_last_of("/\\");
  return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open '" + path.string() + "'");
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::size_t stratum_index(const ClipMeta& m) {
  return index_of(m.scene) * kNumCities + index_of(m.city);
}

}  // namespace

ClipMeta parse_clip_name(std::string_view filename) {
  const std::string_view name = basename(filename);
  constexpr std::string_view kExt = ".wav";
  if (name.size() <= kExt.size() || !name.ends_with(kExt)) {
    throw FormatError("'" + std::string(filename) + "': expected a .wav filename");
  }
  const std::string_view stem = name.substr(0, name.size() - kExt.size());
  const auto fields = split(stem, '-');
  if (fields.size() != 5) {
    throw FormatError("'" + std::string(filename) +
                      "': expected <scene>-<city>-<loc>-<seg>-<dev>.wav, got " +
                      std::to_string(fields.size()) + " fields");
  }
  if (fields[4].empty()) {
    throw FormatError("'" + std::string(filename) + "': empty device field");
  }
  ClipMeta meta;
  meta.id = std::string(stem);
  meta.scene = parse_scene(fields[0]);
  meta.city = parse_city(fields[1]);
  meta.location_id = parse_nonnegative(fields[2], "location", filename);
  meta.segment_id = parse_nonnegative(fields[3], "segment", filename);
  meta.device = std::string(fields[4]);
  meta.path = std::filesystem::path(std::string(filename));
  return meta;
}

std::string format_clip_name(Scene scene, City city, int location_id,
                             int segment_id, std::string_view device) {
  std::ostringstream os;
  os << to_string(scene) << '-' << to_string(city) << '-' << location_id << '-'
     << segment_id << '-' << device << ".wav";
  return os.str();
}

std::vector<ClipMeta> parse_manifest(std::string_view contents,
                                     const std::filesystem::path& audio_root) {
  std::vector<ClipMeta> clips;
  std::size_t line_no = 0;
  for (std::string_view line : split(contents, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (line_no == 1 && cols[0] == "filename") continue;
    ClipMeta meta = parse_clip_name(cols[0]);
    if (cols.size() >= 2 && !cols[1].empty()) {
      const Scene labelled = parse_scene(cols[1]);
      if (labelled != meta.scene) {
        throw ConsistencyError("manifest line " + std::to_string(line_no) +
                               ": scene label '" + std::string(cols[1]) +
                               "' disagrees with filename '" +
                               std::string(cols[0]) + "'");
      }
    }
    meta.path = audio_root / std::string(cols[0]);
    clips.push_back(std::move(meta));
  }
  return clips;
}

std::vector<ClipMeta> load_manifest(const std::filesystem::path& manifest,
                                    const std::filesystem::path& audio_root,
                                    bool require_files) {
  auto clips = parse_manifest(read_text(manifest), audio_root);
  if (require_files) {
    for (const auto& c : clips) {
      if (!std::filesystem::exists(c.path)) {
        throw MissingFileError("manifest '" + manifest.string() +
                               "' references missing file '" + c.path.string() +
                               "'");
      }
    }
  }
  return clips;
}

DatasetSplit load_split_lists(const std::filesystem::path& train_list,
                              const std::filesystem::path& validation_list,
                              const std::filesystem::path& test_list,
                              const std::filesystem::path& audio_root,
                              bool require_files) {
  DatasetSplit split;
  split.train = load_manifest(train_list, audio_root, require_files);
  split.validation = load_manifest(validation_list, audio_root, require_files);
  split.test = load_manifest(test_list, audio_root, require_files);
  std::set<std::string> seen;
  for (const auto* list : {&split.train, &split.validation, &split.test}) {
    for (const auto& c : *list) {
      if (!seen.insert(c.id).second) {
        throw ConsistencyError("clip '" + c.id + "' appears in more than one split list");
      }
    }
  }
  return split;
}

std::array<std::size_t, 3> stratum_counts(std::size_t n,
                                          const SplitFractions& fractions) {
  const std::array<double, 3> f = {fractions.train, fractions.validation,
                                   fractions.test};
  constexpr double kTol = 1e-9;
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(n) * f[k];
    const double whole = std::floor(exact + kTol);
    counts[k] = static_cast<std::size_t>(whole);
    remainder[k] = std::max(0.0, exact - whole);
    assigned += counts[k];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b] + kTol;
  });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
    ++counts[order[i % 3]];
  }
  return counts;
}

DatasetSplit stratified_split(std::span<const ClipMeta> clips,
                              const SplitFractions& fractions,
                              std::uint64_t seed) {
  const std::array<double, 3> f = {fractions.train, fractions.validation,
                                   fractions.test};
  for (double x : f) {
    if (!(x >= 0.0) || x > 1.0) {
      throw ConfigError("split fractions must lie in [0, 1]");
    }
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const bool all_positive = f[0] > 0.0 && f[1] > 0.0 && f[2] > 0.0;

  std::set<std::string> ids;
  for (const auto& c : clips) {
    if (!ids.insert(c.id).second) {
      throw ConsistencyError("duplicate clip id '" + c.id + "'");
    }
  }

  std::array<std::vector<std::size_t>, kNumScenes * kNumCities> strata;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    strata[stratum_index(clips[i])].push_back(i);
  }

  std::vector<int> assignment(clips.size(), -1);
  for (std::size_t s = 0; s < strata.size(); ++s) {
    auto& members = strata[s];
    if (members.empty()) continue;
    if (all_positive && members.size() < 3) {
      throw StratumError(
          "stratum " + std::string(to_string(kAllScenes[s / kNumCities])) + "/" +
          std::string(to_string(kAllCities[s % kNumCities])) + " has " +
          std::to_string(members.size()) + " clip(s); at least 3 are needed");
    }
    Rng rng(derive_seed(seed, s));
    citysound::shuffle(members.begin(), members.end(), rng);
    const auto counts = stratum_counts(members.size(), fractions);
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
      for (std::size_t j = 0; j < counts[static_cast<std::size_t>(k)]; ++j) {
        assignment[members[pos++]] = k;
      }
    }
  }

  DatasetSplit split;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    switch (assignment[i]) {
      case 0: split.train.push_back(clips[i]); break;
      case 1: split.validation.push_back(clips[i]); break;
      default: split.test.push_back(clips[i]); break;
    }
  }
  return split;
}

}  // namespace citysound::dataset
