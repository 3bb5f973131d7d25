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

#include "citysound/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <utility>

#include "citysound/errors.hpp"

namespace citysound::eval {
namespace {

void check_aligned(std::size_t rows, std::size_t truth) {
  if (rows != truth) {
    throw ShapeError("prediction has " + std::to_string(rows) + " rows but truth has " +
                     std::to_string(truth));
  }
}

void check_range(std::span<const std::size_t> truth, std::size_t n, const char* what) {
  for (std::size_t t : truth) {
    if (t >= n) throw IndexError(std::string(what) + " index " + std::to_string(t) + " out of range");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

std::string pair_key(City a, City b) {
  if (index_of(b) < index_of(a)) std::swap(a, b);
  return std::string(to_string(a)) + "-" + std::string(to_string(b));
}

}  // namespace

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::vector<std::size_t> argmax_rows(const features::RealMatrix& scores, std::size_t col_begin,
                                     std::size_t col_end) {
  const auto cols = static_cast<std::size_t>(scores.cols());
  col_end = std::min(col_end, cols);
  if (col_begin >= col_end) throw ShapeError("argmax over an empty column range");
  std::vector<std::size_t> out(static_cast<std::size_t>(scores.rows()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* row = scores.data() + i * cols;
    out[i] = argmax(std::span<const double>(row + col_begin, col_end - col_begin));
  }
  return out;
}

double accuracy(const PredictionMatrix& pred, std::span<const std::size_t> truth) {
  if (pred.rows() == 0) throw EmptyInputError("accuracy of an empty prediction set");
  check_aligned(pred.rows(), truth.size());
  const auto predicted = argmax_rows(pred.scores);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) t += c;
  }
  return t;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

std::size_t ConfusionMatrix::support(std::size_t cls) const {
  std::size_t t = 0;
  for (std::size_t c : counts.at(cls)) t += c;
  return t;
}

ConfusionMatrix confusion(std::span<const std::size_t> predicted,
                          std::span<const std::size_t> truth,
                          std::vector<std::string> class_names) {
  check_aligned(predicted.size(), truth.size());
  const std::size_t n = class_names.size();
  check_range(truth, n, "true class");
  check_range(predicted, n, "predicted class");
  ConfusionMatrix cm;
  cm.class_names = std::move(class_names);
  cm.counts.assign(n, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm.counts[truth[i]][predicted[i]];
  return cm;
}

ConfusionMatrix confusion(const PredictionMatrix& pred, std::span<const std::size_t> truth) {
  check_aligned(pred.rows(), truth.size());
  const auto& scheme = labels::scheme(pred.scheme);
  std::vector<std::string> names;
  if (pred.head < scheme.n_heads() && scheme.n_classes(pred.head) == pred.cols()) {
    names = scheme.class_names[pred.head];
  } else {
    for (std::size_t j = 0; j < pred.cols(); ++j) names.push_back("class_" + std::to_string(j));
  }
  return confusion(argmax_rows(pred.scores), truth, std::move(names));
}

PairAccuracy pair_marginals(const PredictionMatrix& pred, std::span<const std::size_t> truth) {
  const auto& scheme = labels::scheme(pred.scheme);
  if (!scheme.is_pair()) throw SchemeError("pair marginals need a pair scheme, got " + scheme.name);
  if (pred.cols() != scheme.n_classes()) {
    throw SchemeError(scheme.name + " predictions need " + std::to_string(scheme.n_classes()) +
                      " columns");
  }
  if (pred.rows() == 0) throw EmptyInputError("pair marginals of an empty prediction set");
  check_aligned(pred.rows(), truth.size());
  check_range(truth, scheme.n_classes(), "true pair");
  const auto predicted = argmax_rows(pred.scores);
  std::size_t city = 0, component = 0, joint = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto p = labels::decode(predicted[i], scheme);
    const auto t = labels::decode(truth[i], scheme);
    const bool city_ok = p.city == t.city;
    const bool comp_ok = scheme.id == labels::SchemeId::kPair60 ? p.scene == t.scene : p.group == t.group;
    city += city_ok ? 1 : 0;
    component += comp_ok ? 1 : 0;
    joint += predicted[i] == truth[i] ? 1 : 0;
  }
  const auto n = static_cast<double>(truth.size());
  return {city / n, component / n, joint / n};
}

MultilabelResult multilabel_evaluate(const PredictionMatrix& pred,
                                     std::span<const std::size_t> true_scenes,
                                     std::span<const std::size_t> true_cities, double threshold) {
  if (pred.cols() != kNumScenes + kNumCities) {
    throw SchemeError("multi-label evaluation needs 16 columns, got " + std::to_string(pred.cols()));
  }
  if (pred.rows() == 0) throw EmptyInputError("multi-label evaluation of an empty prediction set");
  check_aligned(pred.rows(), true_scenes.size());
  check_aligned(pred.rows(), true_cities.size());
  check_range(true_scenes, kNumScenes, "true scene");
  check_range(true_cities, kNumCities, "true city");

  const auto scenes = argmax_rows(pred.scores, 0, kNumScenes);
  const auto cities = argmax_rows(pred.scores, kNumScenes, kNumScenes + kNumCities);
  MultilabelResult r;
  std::size_t s_ok = 0, c_ok = 0, j_ok = 0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    const bool s = scenes[i] == true_scenes[i];
    const bool c = cities[i] == true_cities[i];
    s_ok += s ? 1 : 0;
    c_ok += c ? 1 : 0;
    j_ok += s && c ? 1 : 0;
    auto& row = r.binarized.emplace_back(pred.cols());
    for (std::size_t j = 0; j < pred.cols(); ++j) {
      row[j] = pred.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= threshold;
    }
  }
  const auto n = static_cast<double>(pred.rows());
  r.scene = s_ok / n;
  r.city = c_ok / n;
  r.joint = j_ok / n;
  return r;
}

PerClassAccuracy per_class_accuracy(const ConfusionMatrix& cm) {
  PerClassAccuracy t;
  t.class_names = cm.class_names;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t i = 0; i < cm.counts.size(); ++i) {
    const std::size_t s = cm.support(i);
    t.support.push_back(s);
    if (s == 0) {
      t.recall.emplace_back();
      continue;
    }
    const double r = static_cast<double>(cm.counts[i][i]) / static_cast<double>(s);
    t.recall.emplace_back(r);
    sum += r;
    ++defined;
  }
  if (defined > 0) t.macro = sum / static_cast<double>(defined);
  return t;
}

PerClassAccuracy per_class_accuracy(const PredictionMatrix& pred,
                                    std::span<const std::size_t> truth) {
  return per_class_accuracy(confusion(pred, truth));
}

double city_miles(City a, City b) {
  static const std::map<std::string, double> miles = {
      {"london-paris", 234},        {"helsinki-stockholm", 302}, {"barcelona-paris", 620},
      {"paris-vienna", 721},        {"barcelona-london", 829},   {"london-vienna", 867},
      {"stockholm-vienna", 876},    {"helsinki-vienna", 1007},   {"barcelona-vienna", 1034},
      {"london-stockholm", 1083},   {"paris-stockholm", 1094},   {"helsinki-london", 1384},
      {"helsinki-paris", 1395},     {"barcelona-stockholm", 1642}, {"barcelona-helsinki", 1897},
  };
  if (a == b) return 0.0;
  return miles.at(pair_key(a, b));
}

std::vector<CityDistance> city_feature_distances(std::span<const features::FeatureMatrix> matrices,
                                                 std::span<const City> cities,
                                                 DistanceOrder order) {
  if (matrices.size() != cities.size()) {
    throw ShapeError("city distances: matrices and city labels differ in length");
  }
  std::array<std::vector<double>, kNumCities> sums;
  std::array<std::size_t, kNumCities> frames{};
  std::size_t n_bins = 0;
  for (std::size_t k = 0; k < matrices.size(); ++k) {
    const auto& m = matrices[k].values;
    if (k == 0) n_bins = static_cast<std::size_t>(m.cols());
    if (static_cast<std::size_t>(m.cols()) != n_bins) {
      throw ShapeError("city distances: inconsistent bin counts");
    }
    const std::size_t c = index_of(cities[k]);
    if (c >= kNumCities) throw VocabularyError("city distances: unknown city");
    auto& s = sums[c];
    s.resize(n_bins, 0.0);
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
      for (Eigen::Index b = 0; b < m.cols(); ++b) s[static_cast<std::size_t>(b)] += m(t, b);
    }
    frames[c] += static_cast<std::size_t>(m.rows());
  }
  for (City c : kAllCities) {
    if (frames[index_of(c)] == 0) {
      throw StratumError("city distances: no training frames for " + std::string(to_string(c)));
    }
  }
  std::array<std::vector<double>, kNumCities> means;
  for (std::size_t c = 0; c < kNumCities; ++c) {
    means[c] = sums[c];
    for (double& v : means[c]) v /= static_cast<double>(frames[c]);
  }

  std::vector<CityDistance> rows;
  for (std::size_t i = 0; i < kNumCities; ++i) {
    for (std::size_t j = i + 1; j < kNumCities; ++j) {
      double d2 = 0.0;
      for (std::size_t b = 0; b < n_bins; ++b) {
        const double d = means[i][b] - means[j][b];
        d2 += d * d;
      }
      const City a = kAllCities[i], b = kAllCities[j];
      rows.push_back({a, b, city_miles(a, b), std::sqrt(d2)});
    }
  }
  switch (order) {
    case DistanceOrder::kMiles:
      std::stable_sort(rows.begin(), rows.end(),
                       [](const auto& x, const auto& y) { return x.miles < y.miles; });
      break;
    case DistanceOrder::kEuclidean:
      std::stable_sort(rows.begin(), rows.end(),
                       [](const auto& x, const auto& y) { return x.euclidean < y.euclidean; });
      break;
    case DistanceOrder::kAlphabetical:
      break;
  }
  return rows;
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  auto out = open_out(path);
  out << "true\\predicted";
  for (const auto& n : cm.class_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < cm.counts.size(); ++i) {
    out << cm.class_names[i];
    for (std::size_t c : cm.counts[i]) out << ',' << c;
    out << '\n';
  }
  finish(out, path);
}

void write_confusion_pgm(const std::filesystem::path& path, const ConfusionMatrix& cm,
                         int cell_pixels) {
  if (cell_pixels < 1) throw ConfigError("PGM cell size must be positive");
  const std::size_t n = cm.counts.size();
  const std::size_t px = static_cast<std::size_t>(cell_pixels);
  std::size_t peak = 0;
  for (const auto& row : cm.counts) {
    for (std::size_t c : row) peak = std::max(peak, c);
  }
  auto out = open_out(path, true);
  out << "P5\n" << n * px << ' ' << n * px << "\n255\n";
  std::vector<char> line(n * px);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double frac = peak == 0 ? 0.0 : static_cast<double>(cm.counts[i][j]) / static_cast<double>(peak);
      const auto v = static_cast<unsigned char>(std::lround(255.0 * frac));
      std::fill_n(line.begin() + static_cast<std::ptrdiff_t>(j * px), px, static_cast<char>(v));
    }
    for (std::size_t r = 0; r < px; ++r) out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  finish(out, path);
}

void write_noteworthy_confusions(const std::filesystem::path& path, const ConfusionMatrix& cm,
                                 std::size_t threshold) {
  auto out = open_out(path);
  out << "true,predicted,count\n";
  for (std::size_t i = 0; i < cm.counts.size(); ++i) {
    for (std::size_t j = 0; j < cm.counts.size(); ++j) {
      if (i != j && cm.counts[i][j] > threshold) {
        out << cm.class_names[i] << ',' << cm.class_names[j] << ',' << cm.counts[i][j] << '\n';
      }
    }
  }
  finish(out, path);
}

void write_per_class_csv(const std::filesystem::path& path, const PerClassAccuracy& table) {
  auto out = open_out(path);
  out << "class,support,recall\n";
  for (std::size_t i = 0; i < table.class_names.size(); ++i) {
    out << table.class_names[i] << ',' << table.support[i] << ','
        << (table.recall[i] ? fmt(*table.recall[i]) : "undefined") << '\n';
  }
  out << "macro_average,," << (table.macro ? fmt(*table.macro) : "undefined") << '\n';
  finish(out, path);
}

void write_distance_csv(const std::filesystem::path& path, std::span<const CityDistance> rows) {
  auto out = open_out(path);
  out << "city_a,city_b,miles,feature_euclidean\n";
  for (const auto& r : rows) {
    out << to_string(r.a) << ',' << to_string(r.b) << ',' << r.miles << ',' << fmt(r.euclidean) << '\n';
  }
  finish(out, path);
}

void write_binarized_csv(const std::filesystem::path& path, const MultilabelResult& result,
                         std::span<const std::string> sample_ids,
                         std::span<const std::string> class_names) {
  auto out = open_out(path);
  out << "id";
  for (const auto& n : class_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < result.binarized.size(); ++i) {
    out << (i < sample_ids.size() ? sample_ids[i] : std::to_string(i));
    for (auto b : result.binarized[i]) out << ',' << static_cast<int>(b);
    out << '\n';
  }
  finish(out, path);
}

}  // namespace citysound::eval
