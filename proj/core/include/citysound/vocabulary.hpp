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
#include <string>
#include <string_view>

namespace citysound {

// Scenes and cities of the DCASE 2018 subtask 1A corpus. Enumerator order is
// alphabetical by token and doubles as the class index everywhere.
enum class Scene {
  kAirport,
  kBus,
  kMetro,
  kMetroStation,
  kPark,
  kPublicSquare,
  kShoppingMall,
  kStreetPedestrian,
  kStreetTraffic,
  kTram,
};

enum class City {
  kBarcelona,
  kHelsinki,
  kLondon,
  kParis,
  kStockholm,
  kVienna,
};

inline constexpr std::size_t kNumScenes = 10;
inline constexpr std::size_t kNumCities = 6;

inline constexpr std::array<Scene, kNumScenes> kAllScenes = {
    Scene::kAirport,      Scene::kBus,          Scene::kMetro,
    Scene::kMetroStation, Scene::kPark,         Scene::kPublicSquare,
    Scene::kShoppingMall, Scene::kStreetPedestrian, Scene::kStreetTraffic,
    Scene::kTram};

inline constexpr std::array<City, kNumCities> kAllCities = {
    City::kBarcelona, City::kHelsinki,  City::kLondon,
    City::kParis,     City::kStockholm, City::kVienna};

constexpr std::size_t index_of(Scene s) { return static_cast<std::size_t>(s); }
constexpr std::size_t index_of(City c) { return static_cast<std::size_t>(c); }

// Lower-case tokens as they appear in corpus filenames.
std::string_view to_string(Scene scene);
std::string_view to_string(City city);

// Throws VocabularyError for tokens outside the fixed vocabularies.
Scene parse_scene(std::string_view token);
City parse_city(std::string_view token);

Scene scene_from_index(std::size_t index);
City city_from_index(std::size_t index);

}  // namespace citysound
