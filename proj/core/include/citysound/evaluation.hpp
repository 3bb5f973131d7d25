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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "citysound/features.hpp"
#include "citysound/labels.hpp"

namespace citysound::eval {

// Scores for one output head: rows are samples, columns classes.
struct PredictionMatrix {
  features::RealMatrix scores;
  labels::SchemeId scheme = labels::SchemeId::kCity6;
  std::size_t head = 0;
  std::vector<std::string> sample_ids;

  std::size_t rows() const { return static_cast<std::size_t>(scores.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(scores.cols()); }
};

// Index of the row maximum; ties go to the lowest index.
std::size_t argmax(std::span<const double> row);
std::vector<std::size_t> argmax_rows(const features::RealMatrix& scores,
                                     std::size_t col_begin = 0,
                                     std::size_t col_end = SIZE_MAX);

// Throws EmptyInputError on zero rows, ShapeError on misaligned truth.
double accuracy(const PredictionMatrix& pred, std::span<const std::size_t> truth);

struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::size_t>> counts;  // [true][predicted]

  std::size_t total() const;
  std::size_t trace() const;
  std::size_t support(std::size_t cls) const;
};

ConfusionMatrix confusion(const PredictionMatrix& pred, std::span<const std::size_t> truth);
ConfusionMatrix confusion(std::span<const std::size_t> predicted,
                          std::span<const std::size_t> truth,
                          std::vector<std::string> class_names);

struct PairAccuracy {
  double city = 0.0;
  double component = 0.0;  // scene for pair60, group for grouped_pair18
  double joint = 0.0;
};

// `truth` holds pair class indices. Throws SchemeError unless the matrix
// belongs to pair60 or grouped_pair18.
PairAccuracy pair_marginals(const PredictionMatrix& pred, std::span<const std::size_t> truth);

inline constexpr double kMultilabelThreshold = 0.4;

struct MultilabelResult {
  double scene = 0.0;
  double city = 0.0;
  double joint = 0.0;
  std::vector<std::vector<std::uint8_t>> binarized;  // scores >= threshold
};

// Scores each sub-matrix (scenes 0..9, cities 10..15) by argmax. Throws
// SchemeError unless the matrix has 16 columns.
MultilabelResult multilabel_evaluate(const PredictionMatrix& pred,
                                     std::span<const std::size_t> true_scenes,
                                     std::span<const std::size_t> true_cities,
                                     double threshold = kMultilabelThreshold);

struct PerClassAccuracy {
  std::vector<std::string> class_names;
  std::vector<std::size_t> support;
  std::vector<std::optional<double>> recall;  // empty when support is zero
  std::optional<double> macro;                // mean of defined recalls
};

PerClassAccuracy per_class_accuracy(const ConfusionMatrix& cm);
PerClassAccuracy per_class_accuracy(const PredictionMatrix& pred,
                                    std::span<const std::size_t> truth);

// Great-circle separations in miles between the six cities.
double city_miles(City a, City b);

struct CityDistance {
  City a = City::kBarcelona;
  City b = City::kBarcelona;
  double miles = 0.0;
  double euclidean = 0.0;
};

enum class DistanceOrder { kMiles, kEuclidean, kAlphabetical };

// Mean feature vector per city over every frame of its matrices, then all
// 15 pairwise Euclidean distances. Throws StratumError if a city has no
// matrix.
std::vector<CityDistance> city_feature_distances(std::span<const features::FeatureMatrix> matrices,
                                                 std::span<const City> cities,
                                                 DistanceOrder order = DistanceOrder::kMiles);

// Report writers.
void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
// Binary 8-bit PGM; cell intensity is the count scaled by the maximum.
void write_confusion_pgm(const std::filesystem::path& path, const ConfusionMatrix& cm,
                         int cell_pixels = 8);
// Off-diagonal cells whose count exceeds `threshold`.
void write_noteworthy_confusions(const std::filesystem::path& path, const ConfusionMatrix& cm,
                                 std::size_t threshold = 10);
void write_per_class_csv(const std::filesystem::path& path, const PerClassAccuracy& table);
void write_distance_csv(const std::filesystem::path& path, std::span<const CityDistance> rows);
void write_binarized_csv(const std::filesystem::path& path, const MultilabelResult& result,
                         std::span<const std::string> sample_ids,
                         std::span<const std::string> class_names);

}  // namespace citysound::eval
