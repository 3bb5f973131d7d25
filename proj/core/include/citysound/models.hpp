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
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "citysound/dataset.hpp"
#include "citysound/errors.hpp"
#include "citysound/evaluation.hpp"
#include "citysound/features.hpp"
#include "citysound/labels.hpp"
#include "citysound/nnet/adam.hpp"
#include "citysound/nnet/network.hpp"

namespace citysound::models {

// kTable2 has three conv blocks; kBenchmark drops the third.
enum class Architecture { kTable2, kBenchmark };
// Where the multitask heads leave the shared trunk.
enum class BranchPoint { kAfterDense, kAfterFlatten };

struct EpochLog {
  int epoch = 0;
  std::string split;  // "train" or "validation"
  double loss = 0.0;
  double accuracy = 0.0;  // joint accuracy for multilabel16
  std::vector<double> head_loss;      // multitask only
  std::vector<double> head_accuracy;  // multitask only
};

struct ModelConfig {
  labels::SchemeId scheme = labels::SchemeId::kCity6;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;
  nnet::AdamConfig adam;
  double scene_weight = 0.5;
  double city_weight = 0.3;
  // (frames, bins, 1) after downsampling; zero means take it from the data.
  nnet::Shape3 input_shape;
  Architecture architecture = Architecture::kTable2;
  BranchPoint branch = BranchPoint::kAfterDense;
  int time_downsample = 1;  // average-pool factor over frames
  // Called after every logged epoch row; may run on worker threads.
  std::function<void(const EpochLog&)> on_epoch;

  void validate() const;
};

// Conv blocks, flatten and the dense(64) block shared by every variant.
std::vector<nnet::LayerSpec> baseline_trunk(Architecture arch = Architecture::kTable2);

nnet::NetworkSpec build_baseline(std::size_t n_classes, nnet::Shape3 input, bool sigmoid = false,
                                 Architecture arch = Architecture::kTable2);
nnet::NetworkSpec build_multitask(nnet::Shape3 input, double scene_weight = 0.5,
                                  double city_weight = 0.3,
                                  BranchPoint branch = BranchPoint::kAfterDense,
                                  Architecture arch = Architecture::kTable2);
// The network for config.scheme. Validates shapes; too small an input
// throws ShapeError.
nnet::NetworkSpec build_network(const ModelConfig& config);

// Final (normalized, smoothed) features with their clip metadata.
struct FeatureSet {
  std::vector<features::FeatureMatrix> matrices;
  std::vector<dataset::ClipMeta> metas;

  std::size_t size() const { return matrices.size(); }
  bool empty() const { return matrices.empty(); }
  void add(features::FeatureMatrix m, dataset::ClipMeta meta);
  FeatureSet filter_scene(Scene scene) const;
};

// Average-pools frames in groups of k; a partial trailing group is
// averaged over the frames it has.
features::FeatureMatrix downsample_time(const features::FeatureMatrix& m, int k);


struct TrainedModel {
  const labels::LabelScheme* scheme = nullptr;
  std::uint64_t seed = 0;
  int time_downsample = 1;
  nnet::Network<float> network;
  nnet::Adam<float> optimizer;
  std::vector<EpochLog> training_log;

  const nnet::NetworkSpec& spec() const { return network.spec(); }
};

// Thrown when a non-finite loss or gradient stops training. The model is
// rolled back to the end of the last completed epoch.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, std::shared_ptr<TrainedModel> model)
      : NumericError(what), model_(std::move(model)) {}
  const std::shared_ptr<TrainedModel>& model() const { return model_; }

 private:
  std::shared_ptr<TrainedModel> model_;
};

// Mini-batch Adam over `train`, shuffled per epoch; logs train and, when
// present, validation metrics every epoch. No early stopping.
TrainedModel train(const ModelConfig& config, const FeatureSet& train,
                   const FeatureSet& validation = {});

// Seed of the scene-specific model for `scene`.
std::uint64_t scene_seed(std::uint64_t base, Scene scene);

// One city6 model per scene, trained on that scene's clips only. Throws
// StratumError if a scene has no training clips. Models are independent
// and may be trained on up to `parallel` threads.

std::map<Scene, TrainedModel> train_scene_specific(const ModelConfig& config,
                                                   const FeatureSet& train,
                                                   const FeatureSet& validation = {},
                                                   int parallel = 1);

// Inference-mode scores, one matrix per head.
std::vector<eval::PredictionMatrix> predict(TrainedModel& model, const FeatureSet& data,
                                            int batch_size = 32);

// Model-specific truth indices for `data` (per head; multilabel16 yields
// scene and city index vectors).
std::vector<std::vector<std::size_t>> truth_indices(const labels::LabelScheme& scheme,
                                                    const FeatureSet& data);

// Accuracy the training log reports for these predictions.
double log_accuracy(const labels::LabelScheme& scheme,
                    std::span<const eval::PredictionMatrix> predictions,
                    const FeatureSet& data);

void save_model(const std::filesystem::path& path, TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

void write_training_log(const std::filesystem::path& path, const TrainedModel& model);
std::string format_training_log(const TrainedModel& model);

}  // namespace citysound::models
