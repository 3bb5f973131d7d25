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

#include "citysound/labels.hpp"

#include "citysound/errors.hpp"

namespace citysound::labels {
namespace {

void check_scene(Scene s) {
  if (index_of(s) >= kNumScenes) {
    throw VocabularyError("unknown scene index " + std::to_string(index_of(s)));
  }
}

void check_city(City c) {
  if (index_of(c) >= kNumCities) {
    throw VocabularyError("unknown city index " + std::to_string(index_of(c)));
  }
}

std::vector<std::string> scene_names() {
  std::vector<std::string> out;
  for (Scene s : kAllScenes) out.emplace_back(to_string(s));
  return out;
}

std::vector<std::string> city_names() {
  std::vector<std::string> out;
  for (City c : kAllCities) out.emplace_back(to_string(c));
  return out;
}

std::vector<std::string> group_names() {
  return {"indoor", "outdoor", "transport"};
}

std::vector<std::string> cross(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> out;
  for (const auto& x : a) {
    for (const auto& y : b) out.push_back(x + "_" + y);
  }
  return out;
}

LabelScheme make(SchemeId id) {
  LabelScheme s;
  s.id = id;
  switch (id) {
    case SchemeId::kCity6:
      s.name = "city6";
      s.class_names = {city_names()};
      break;
    case SchemeId::kScene10:
      s.name = "scene10";
      s.class_names = {scene_names()};
      break;
    case SchemeId::kPair60:
      s.name = "pair60";
      s.class_names = {cross(scene_names(), city_names())};
      break;
    case SchemeId::kGrouped3:
      s.name = "grouped3";
      s.class_names = {group_names()};
      break;
    case SchemeId::kGroupedPair18:
      s.name = "grouped_pair18";
      s.class_names = {cross(group_names(), city_names())};
      break;
    case SchemeId::kMultilabel16: {
      s.name = "multilabel16";
      auto names = scene_names();
      for (auto& c : city_names()) names.push_back(std::move(c));
      s.class_names = {std::move(names)};
      break;
    }
    case SchemeId::kMultitask:
      s.name = "multitask";
      s.class_names = {scene_names(), city_names()};
      break;
  }
  return s;
}

const std::array<LabelScheme, 7>& registry() {
  static const std::array<LabelScheme, 7> all = {
      make(SchemeId::kCity6),         make(SchemeId::kScene10),      make(SchemeId::kPair60),
      make(SchemeId::kGrouped3),      make(SchemeId::kGroupedPair18), make(SchemeId::kMultilabel16),
      make(SchemeId::kMultitask)};
  return all;
}

std::vector<float> one_hot(std::size_t n, std::size_t i) {
  std::vector<float> v(n, 0.0f);
  v[i] = 1.0f;
  return v;
}

}  // namespace

SceneGroup group_of(Scene scene) {
  switch (scene) {
    case Scene::kAirport:
    case Scene::kShoppingMall:
    case Scene::kMetroStation:
      return SceneGroup::kIndoor;
    case Scene::kStreetPedestrian:
    case Scene::kPublicSquare:
    case Scene::kStreetTraffic:
    case Scene::kPark:
      return SceneGroup::kOutdoor;
    case Scene::kTram:
    case Scene::kBus:
    case Scene::kMetro:
      return SceneGroup::kTransport;
  }
  throw VocabularyError("unknown scene index " + std::to_string(index_of(scene)));
}

std::string_view to_string(SceneGroup group) {
  switch (group) {
    case SceneGroup::kIndoor:
      return "indoor";
    case SceneGroup::kOutdoor:
      return "outdoor";
    case SceneGroup::kTransport:
      return "transport";
  }
  throw VocabularyError("unknown scene group");
}

const LabelScheme& scheme(SchemeId id) {
  const auto i = static_cast<std::size_t>(id);
  if (i >= registry().size()) throw SchemeError("unknown scheme id");
  return registry()[i];
}

const LabelScheme& scheme_from_name(std::string_view name) {
  for (const auto& s : registry()) {
    if (s.name == name) return s;
  }
  throw SchemeError("unknown label scheme '" + std::string(name) + "'");
}

std::size_t class_index(const dataset::ClipMeta& meta, const LabelScheme& scheme, std::size_t head) {
  check_scene(meta.scene);
  check_city(meta.city);
  if (head >= scheme.n_heads()) throw IndexError("head " + std::to_string(head) + " out of range");
  const std::size_t s = index_of(meta.scene);
  const std::size_t c = index_of(meta.city);
  switch (scheme.id) {
    case SchemeId::kCity6:
      return c;
    case SchemeId::kScene10:
      return s;
    case SchemeId::kPair60:
      return s * kNumCities + c;
    case SchemeId::kGrouped3:
      return index_of(group_of(meta.scene));
    case SchemeId::kGroupedPair18:
      return index_of(group_of(meta.scene)) * kNumCities + c;
    case SchemeId::kMultitask:
      return head == 0 ? s : c;
    case SchemeId::kMultilabel16:
      break;
  }
  throw SchemeError("scheme '" + scheme.name + "' has no single class index");
}

Targets encode(const dataset::ClipMeta& meta, const LabelScheme& scheme) {
  check_scene(meta.scene);
  check_city(meta.city);
  if (scheme.id == SchemeId::kMultilabel16) {
    std::vector<float> v(kNumScenes + kNumCities, 0.0f);
    v[index_of(meta.scene)] = 1.0f;
    v[kNumScenes + index_of(meta.city)] = 1.0f;
    return {std::move(v)};
  }
  Targets out;
  for (std::size_t h = 0; h < scheme.n_heads(); ++h) {
    out.push_back(one_hot(scheme.n_classes(h), class_index(meta, scheme, h)));
  }
  return out;
}

Decoded decode(std::size_t index, const LabelScheme& scheme) {
  if (scheme.id == SchemeId::kMultitask) {
    throw SchemeError("multitask decoding needs one index per head");
  }
  if (index >= scheme.n_classes()) {
    throw IndexError("class index " + std::to_string(index) + " out of range for " + scheme.name);
  }
  Decoded d;
  switch (scheme.id) {
    case SchemeId::kCity6:
      d.city = city_from_index(index);
      break;
    case SchemeId::kScene10:
      d.scene = scene_from_index(index);
      d.group = group_of(*d.scene);
      break;
    case SchemeId::kPair60:
      d.scene = scene_from_index(index / kNumCities);
      d.group = group_of(*d.scene);
      d.city = city_from_index(index % kNumCities);
      break;
    case SchemeId::kGrouped3:
      d.group = static_cast<SceneGroup>(index);
      break;
    case SchemeId::kGroupedPair18:
      d.group = static_cast<SceneGroup>(index / kNumCities);
      d.city = city_from_index(index % kNumCities);
      break;
    case SchemeId::kMultilabel16:
      if (index < kNumScenes) {
        d.scene = scene_from_index(index);
        d.group = group_of(*d.scene);
      } else {
        d.city = city_from_index(index - kNumScenes);
      }
      break;
    case SchemeId::kMultitask:
      break;
  }
  return d;
}

Decoded decode(std::pair<std::size_t, std::size_t> indices, const LabelScheme& scheme) {
  if (scheme.id != SchemeId::kMultitask) throw SchemeError("index pairs only decode multitask");
  if (indices.first >= kNumScenes || indices.second >= kNumCities) {
    throw IndexError("multitask index pair out of range");
  }
  Decoded d;
  d.scene = scene_from_index(indices.first);
  d.group = group_of(*d.scene);
  d.city = city_from_index(indices.second);
  return d;
}

}  // namespace citysound::labels
