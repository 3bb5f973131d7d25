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

#include "citysound/vocabulary.hpp"

#include <string>

#include "citysound/errors.hpp"

namespace citysound {
namespace {

constexpr std::array<std::string_view, kNumScenes> kSceneTokens = {
    "airport",       "bus",           "metro",
    "metro_station", "park",          "public_square",
    "shopping_mall", "street_pedestrian", "street_traffic",
    "tram"};

constexpr std::array<std::string_view, kNumCities> kCityTokens = {
    "barcelona", "helsinki", "london", "paris", "stockholm", "vienna"};

}  // namespace

std::string_view to_string(Scene scene) { return kSceneTokens[index_of(scene)]; }
std::string_view to_string(City city) { return kCityTokens[index_of(city)]; }

Scene parse_scene(std::string_view token) {
  for (std::size_t i = 0; i < kNumScenes; ++i) {
    if (kSceneTokens[i] == token) return kAllScenes[i];
  }
  throw VocabularyError("unknown scene '" + std::string(token) + "'");
}

City parse_city(std::string_view token) {
  for (std::size_t i = 0; i < kNumCities; ++i) {
    if (kCityTokens[i] == token) return kAllCities[i];
  }
  throw VocabularyError("unknown city '" + std::string(token) + "'");
}

Scene scene_from_index(std::size_t index) {
  if (index >= kNumScenes) {
    throw IndexError("scene index " + std::to_string(index) + " out of range");
  }
  return kAllScenes[index];
}

City city_from_index(std::size_t index) {
  if (index >= kNumCities) {
    throw IndexError("city index " + std::to_string(index) + " out of range");
  }
  return kAllCities[index];
}

}  // namespace citysound
