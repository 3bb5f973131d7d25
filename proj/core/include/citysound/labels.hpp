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
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "citysound/dataset.hpp"
#include "citysound/vocabulary.hpp"

namespace citysound::labels {

enum class SchemeId {
  kCity6,
  kScene10,
  kPair60,
  kGrouped3,
  kGroupedPair18,
  kMultilabel16,
  kMultitask,
};

enum class SceneGroup { kIndoor, kOutdoor, kTransport };
inline constexpr std::size_t kNumGroups = 3;

SceneGroup group_of(Scene scene);
std::string_view to_string(SceneGroup group);
constexpr std::size_t index_of(SceneGroup g) { return static_cast<std::size_t>(g); }

// A labeling scheme has one output head, except multitask which has a
// scene head (10) and a city head (6).
struct LabelScheme {
  SchemeId id = SchemeId::kCity6;
  std::string name;
  std::vector<std::vector<std::string>> class_names;  // per head

  std::size_t n_heads() const { return class_names.size(); }
  std::size_t n_classes(std::size_t head = 0) const { return class_names.at(head).size(); }
  bool is_pair() const { return id == SchemeId::kPair60 || id == SchemeId::kGroupedPair18; }
  bool is_multilabel() const { return id == SchemeId::kMultilabel16; }
};

const LabelScheme& scheme(SchemeId id);
// Accepts exactly the scheme names above; anything else throws SchemeError.
const LabelScheme& scheme_from_name(std::string_view name);
inline constexpr std::array<SchemeId, 7> kAllSchemes = {
    SchemeId::kCity6,        SchemeId::kScene10,      SchemeId::kPair60,
    SchemeId::kGrouped3,     SchemeId::kGroupedPair18, SchemeId::kMultilabel16,
    SchemeId::kMultitask};

// Target vectors, one per head.
using Targets = std::vector<std::vector<float>>;
Targets encode(const dataset::ClipMeta& meta, const LabelScheme& scheme);

// Index of the hot entry for one-hot heads. Throws SchemeError for
// multilabel16, which has no single index.
std::size_t class_index(const dataset::ClipMeta& meta, const LabelScheme& scheme, std::size_t head = 0);

struct Decoded {
  std::optional<Scene> scene;
  std::optional<SceneGroup> group;
  std::optional<City> city;
  friend bool operator==(const Decoded&, const Decoded&) = default;
};

// Inverse of class_index; a known scene also fills in its group. For
// multilabel16 a single index names either a scene (0..9) or a city
// (10..15). Multitask requires the pair overload.
Decoded decode(std::size_t index, const LabelScheme& scheme);
Decoded decode(std::pair<std::size_t, std::size_t> indices, const LabelScheme& scheme);

}  // namespace citysound::labels
