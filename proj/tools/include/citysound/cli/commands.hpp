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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "citysound/dataset.hpp"
#include "citysound/features.hpp"
#include "citysound/models.hpp"
#include "citysound/synth.hpp"

namespace citysound::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

// Parses and runs one command line; `args` excludes the program name.
// Errors are reported on stderr and mapped to an ExitCode.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

enum class Experiment {
  kBenchmarkScene10,
  kCity6,
  kScenePriors,
  kPair60,
  kGrouped3,
  kGroupedPair18,
  kMultilabel16,
  kMultitask,
};

inline constexpr Experiment kAllExperiments[] = {
    Experiment::kBenchmarkScene10, Experiment::kCity6,         Experiment::kScenePriors,
    Experiment::kPair60,           Experiment::kGrouped3,      Experiment::kGroupedPair18,
    Experiment::kMultilabel16,     Experiment::kMultitask};

std::string experiment_name(Experiment e);
// Throws ConfigError for names outside the fixed set.
Experiment parse_experiment(const std::string& name);

// One trained network of an experiment and where it lives on disk.
struct ModelSlot {
  std::string name;  // file stem, e.g. "model", "benchmark", "park"
  labels::SchemeId scheme = labels::SchemeId::kCity6;
  models::Architecture architecture = models::Architecture::kTable2;
  std::optional<Scene> scene;  // scene_priors only
};
std::vector<ModelSlot> experiment_models(Experiment e);

// ---- synth

struct SynthOptions {
  std::filesystem::path out_dir;
  dataset::SynthConfig config;
};
// Writes <out>/audio/*.wav and a <out>/meta.csv manifest; returns the
// manifest path.
std::filesystem::path cmd_synth(const SynthOptions& options);

// ---- extract

struct ExtractOptions {
  std::filesystem::path data_root;
  std::filesystem::path manifest;  // default <data_root>/meta.csv
  std::filesystem::path out_dir;
  features::FeatureConfig features;
  dataset::SplitFractions fractions;
  std::uint64_t split_seed = 0;
  // Official split lists, relative to data_root; used instead of a
  // stratified split when the train list is given.
  std::filesystem::path train_list, validation_list, test_list;
  bool force = false;
  bool quiet = false;
};

struct ExtractSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;
};
ExtractSummary cmd_extract(const ExtractOptions& options);

// A feature directory produced by cmd_extract:
//   clips/<id>.csfm     raw log-mel per clip (cache format)
//   clips.tsv           id, subset, audio path
//   norm_stats.csfm     2 x n_bins, row 0 mean, row 1 std (train split)
//   feature_config.txt  key=value extraction settings
class FeatureStore {
 public:
  explicit FeatureStore(std::filesystem::path dir);

  const features::FeatureConfig& config() const { return config_; }
  const features::NormStats& stats() const { return stats_; }
  // Final (normalized, smoothed) features of one subset: train,
  // validation or test.
  models::FeatureSet load(const std::string& subset) const;
  std::size_t count(const std::string& subset) const;

 private:
  std::filesystem::path dir_;
  features::FeatureConfig config_;
  features::NormStats stats_;
  std::vector<std::pair<dataset::ClipMeta, std::string>> clips_;
};

std::string format_feature_config(const features::FeatureConfig& config);
features::FeatureConfig parse_feature_config(const std::string& text);

// ---- train

struct TrainOptions {
  std::filesystem::path features_dir;
  std::filesystem::path out_dir;
  Experiment experiment = Experiment::kCity6;
  models::ModelConfig model;
  int parallel = 1;
  bool force = false;
  bool quiet = false;
};
// Writes <out>/<experiment>/<slot>.csnn and <slot>_log.csv per model.
void cmd_train(const TrainOptions& options);

// ---- evaluate

struct ResultRow {
  std::string task;
  std::optional<double> accuracy;  // empty when the experiment failed
  std::string target;  // scene, city or both
  std::size_t n_classes = 0;
};

struct EvaluateOptions {
  std::filesystem::path features_dir;
  std::filesystem::path models_dir;  // the train --out directory
  Experiment experiment = Experiment::kCity6;
  std::string split = "test";
  std::filesystem::path report_dir;  // default <models>/<experiment>/report_<split>
  double threshold = eval::kMultilabelThreshold;
  std::size_t confusion_threshold = 10;
  bool distances = false;
  bool quiet = false;
};
std::vector<ResultRow> cmd_evaluate(const EvaluateOptions& options);

// ---- reproduce-all

struct ReproduceOptions {
  std::string dataset;  // a data root, or "synthetic"
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  dataset::SynthConfig synth;
  ExtractOptions extract;  // data_root, manifest and out_dir are overridden
  models::ModelConfig model;
  std::vector<Experiment> experiments;  // empty: all
  int parallel = 1;
  bool quiet = false;
};
// Runs every experiment and writes <out>/results.csv. Failed experiments
// are recorded and skipped; returns false if any failed.
bool cmd_reproduce_all(const ReproduceOptions& options);

// The rows an experiment contributes, with accuracies unset.
std::vector<ResultRow> result_layout(Experiment e);
void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

}  // namespace citysound::cli
