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

#include <algorithm>
#include <map>
#include <set>

#include "citysound/dataset.hpp"
#include "citysound/errors.hpp"
#include "citysound/vocabulary.hpp"
#include "test_support.hpp"

namespace citysound::dataset {
namespace {

std::vector<ClipMeta> balanced(int per_pair) {
  std::vector<ClipMeta> out;
  int seg = 0;
  for (Scene s : kAllScenes) {
    for (City c : kAllCities) {
      for (int r = 0; r < per_pair; ++r) {
        out.push_back(parse_clip_name(format_clip_name(s, c, r, seg++, "a")));
      }
    }
  }
  return out;
}

TEST(Vocabulary, TokensRoundTrip) {
  for (Scene s : kAllScenes) EXPECT_EQ(parse_scene(to_string(s)), s);
  for (City c : kAllCities) EXPECT_EQ(parse_city(to_string(c)), c);
  EXPECT_EQ(to_string(Scene::kStreetPedestrian), "street_pedestrian");
  EXPECT_THROW(parse_scene("beach"), VocabularyError);
  EXPECT_THROW(parse_city("berlin"), VocabularyError);
  EXPECT_THROW(scene_from_index(10), IndexError);
}

TEST(ParseClipName, DirectParse) {
  const ClipMeta a = parse_clip_name("airport-barcelona-0-0-a.wav");
  EXPECT_EQ(a.scene, Scene::kAirport);
  EXPECT_EQ(a.city, City::kBarcelona);
  EXPECT_EQ(a.location_id, 0);
  EXPECT_EQ(a.segment_id, 0);
  EXPECT_EQ(a.device, "a");
  EXPECT_EQ(a.id, "airport-barcelona-0-0-a");

  const ClipMeta t = parse_clip_name("tram-vienna-285-8639-a.wav");
  EXPECT_EQ(t.scene, Scene::kTram);
  EXPECT_EQ(t.city, City::kVienna);
  EXPECT_EQ(t.location_id, 285);
  EXPECT_EQ(t.segment_id, 8639);
}

TEST(ParseClipName, Rejections) {
  EXPECT_THROW(parse_clip_name("beach-london-1-2-a.wav"), VocabularyError);
  EXPECT_THROW(parse_clip_name("airport-london-1-2.wav"), FormatError);
  EXPECT_THROW(parse_clip_name("airport-london-x-2-a.wav"), FormatError);
  EXPECT_THROW(parse_clip_name("airport-london-1-2-a.flac"), FormatError);
  // Directory prefixes are ignored.
  EXPECT_EQ(parse_clip_name("audio/park-paris-3-4-b.wav").city, City::kParis);
}

TEST(ParseClipName, FormatInverts) {
  for (const auto& m : balanced(1)) {
    EXPECT_EQ(parse_clip_name(format_clip_name(m.scene, m.city, m.location_id, m.segment_id,
                                               m.device)).id,
              m.id);
  }
}

TEST(Manifest, ThreeLinesInOrder) {
  const auto metas = parse_manifest(
      "bus-paris-1-1-a.wav\npark-london-2-2-a.wav\ntram-vienna-3-3-a.wav\n", "root");
  ASSERT_EQ(metas.size(), 3u);
  EXPECT_EQ(metas[0].scene, Scene::kBus);
  EXPECT_EQ(metas[1].scene, Scene::kPark);
  EXPECT_EQ(metas[2].scene, Scene::kTram);
  EXPECT_EQ(metas[2].path, std::filesystem::path("root") / "tram-vienna-3-3-a.wav");
}

TEST(Manifest, EmptyAndHeader) {
  EXPECT_TRUE(parse_manifest("", "r").empty());
  const auto metas = parse_manifest("filename\tscene_label\naudio/bus-paris-1-1-a.wav\tbus\n", "r");
  ASSERT_EQ(metas.size(), 1u);
  EXPECT_EQ(metas[0].path, std::filesystem::path("r") / "audio/bus-paris-1-1-a.wav");
}

TEST(Manifest, SceneColumnCrossChecked) {
  EXPECT_NO_THROW(parse_manifest("bus-paris-1-1-a.wav\tbus\n", "r"));
  EXPECT_THROW(parse_manifest("bus-paris-1-1-a.wav\ttram\n", "r"), ConsistencyError);
}

TEST(Manifest, FilesOnDisk) {
  testing::TempDir dir("cs-manifest");
  testing::write_text(dir / "m.tsv", "bus-paris-1-1-a.wav\n");
  EXPECT_EQ(load_manifest(dir / "m.tsv", dir.path()).size(), 1u);
  EXPECT_THROW(load_manifest(dir / "m.tsv", dir.path(), true), MissingFileError);
  EXPECT_THROW(load_manifest(dir / "missing.tsv", dir.path()), MissingFileError);
}

TEST(SplitLists, ExternalLists) {
  testing::TempDir dir("cs-lists");
  testing::write_text(dir / "a.tsv", "bus-paris-1-1-a.wav\nbus-paris-1-3-a.wav\n");
  testing::write_text(dir / "b.tsv", "bus-paris-1-2-a.wav\n");
  testing::write_text(dir / "c.tsv", "park-paris-1-4-a.wav\n");
  const auto split = load_split_lists(dir / "a.tsv", dir / "b.tsv", dir / "c.tsv", dir.path());
  EXPECT_EQ(split.train.size(), 2u);
  EXPECT_EQ(split.validation.size(), 1u);
  EXPECT_EQ(split.test.front().scene, Scene::kPark);
  EXPECT_THROW(load_split_lists(dir / "a.tsv", dir / "b.tsv", dir / "b.tsv", dir.path()),
               ConsistencyError);
}

TEST(StratifiedSplit, DegenerateFraction) {
  const auto clips = balanced(1);
  const auto split = stratified_split(clips, {1.0, 0.0, 0.0}, 5);
  EXPECT_EQ(split.train.size(), 60u);
  EXPECT_TRUE(split.validation.empty());
  EXPECT_TRUE(split.test.empty());
}

TEST(StratifiedSplit, Deterministic) {
  const auto clips = balanced(10);
  const auto a = stratified_split(clips, {}, 1);
  const auto b = stratified_split(clips, {}, 1);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  const auto c = stratified_split(clips, {}, 2);
  EXPECT_NE(a.test, c.test);
}

// Exhaustive audit: every stratum splits as the largest-remainder counts,
// the three lists partition the input and each keeps input order.
TEST(StratifiedSplit, CountAudit) {
  const auto clips = balanced(10);
  const auto split = stratified_split(clips, {0.7, 0.15, 0.15}, 1);
  std::map<std::pair<Scene, City>, std::array<int, 3>> counts;
  std::set<std::string> seen;
  const std::vector<ClipMeta>* lists[] = {&split.train, &split.validation, &split.test};
  for (int k = 0; k < 3; ++k) {
    for (const auto& m : *lists[k]) {
      ++counts[{m.scene, m.city}][static_cast<std::size_t>(k)];
      EXPECT_TRUE(seen.insert(m.id).second) << m.id;
    }
    auto pos = [&](const ClipMeta& m) {
      return std::find(clips.begin(), clips.end(), m) - clips.begin();
    };
    EXPECT_TRUE(std::is_sorted(lists[k]->begin(), lists[k]->end(),
                               [&](const ClipMeta& a, const ClipMeta& b) { return pos(a) < pos(b); }));
  }
  EXPECT_EQ(seen.size(), clips.size());
  ASSERT_EQ(counts.size(), 60u);
  for (const auto& [key, c] : counts) {
    EXPECT_EQ(c[0], 7);
    EXPECT_EQ(c[1], 2);
    EXPECT_EQ(c[2], 1);
  }
}

// Brute force: the apportionment minimises the largest deviation from
// n * f among all integer triples with the right sum, and never gives a
// split more than ceil(n * f).
TEST(StratumCounts, LargestRemainderProperty) {
  const SplitFractions fracs[] = {{0.7, 0.15, 0.15}, {0.5, 0.25, 0.25}, {0.8, 0.1, 0.1},
                                  {1.0, 0.0, 0.0}, {0.6, 0.3, 0.1}};
  for (const auto& f : fracs) {
    for (std::size_t n = 0; n <= 40; ++n) {
      const auto c = stratum_counts(n, f);
      EXPECT_EQ(c[0] + c[1] + c[2], n);
      const double q[3] = {n * f.train, n * f.validation, n * f.test};
      for (int k = 0; k < 3; ++k) {
        EXPECT_LE(static_cast<double>(c[static_cast<std::size_t>(k)]), std::ceil(q[k] - 1e-9) + 1e-12);
        EXPECT_GE(static_cast<double>(c[static_cast<std::size_t>(k)]), std::floor(q[k] + 1e-9) - 1e-12);
      }
    }
  }
}

TEST(StratifiedSplit, Errors) {
  auto clips = balanced(1);
  EXPECT_THROW(stratified_split(clips, {0.7, 0.15, 0.15}, 1), StratumError);
  EXPECT_THROW(stratified_split(clips, {0.7, 0.2, 0.2}, 1), ConfigError);
  EXPECT_THROW(stratified_split(clips, {1.2, -0.1, -0.1}, 1), ConfigError);
  clips.push_back(clips.front());
  EXPECT_THROW(stratified_split(clips, {1.0, 0.0, 0.0}, 1), ConsistencyError);
}

}  // namespace
}  // namespace citysound::dataset
