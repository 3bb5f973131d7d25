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

#include "citysound/models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "citysound/nnet/checkpoint.hpp"
#include "citysound/nnet/losses.hpp"
#include "citysound/rng.hpp"

namespace citysound::models {
namespace {

using nnet::LayerSpec;
using nnet::Mode;
using nnet::Shape4;
using nnet::Tensor4;

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kSceneStream = 0x5343454e45ULL;
constexpr double kDropout = 0.3;

void check_weight(double w, const char* what) {
  if (!std::isfinite(w) || w < 0.0) {
    throw ConfigError(std::string(what) + " must be finite and non-negative");
  }
}

std::vector<LayerSpec> dense_block() {
  return {LayerSpec::dense(64), LayerSpec::relu(), LayerSpec::dropout(kDropout),
          LayerSpec::batch_norm()};
}

std::vector<LayerSpec> output_layers(std::size_t n, bool sigmoid) {
  return {LayerSpec::dense(static_cast<int>(n)),
          sigmoid ? LayerSpec::sigmoid() : LayerSpec::softmax()};
}

void validate_spec(const nnet::NetworkSpec& spec) { (void)nnet::infer_shapes(spec); }

nnet::Shape3 data_shape(const FeatureSet& data, int k) {
  if (data.empty()) throw EmptyInputError("no feature matrices");
  const auto& m = data.matrices.front();
  const std::size_t frames = (m.n_frames() + static_cast<std::size_t>(k) - 1) / static_cast<std::size_t>(k);
  return {frames, m.n_bins(), 1};
}

Tensor4<float> make_batch(const FeatureSet& data, std::span<const std::size_t> idx,
                          const nnet::Shape3& shape, int k) {
  Tensor4<float> x(Shape4{idx.size(), shape.h, shape.w, shape.c});
  const std::size_t per = shape.h * shape.w * shape.c;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& raw = data.matrices.at(idx[i]);
    const features::FeatureMatrix ds = k == 1 ? features::FeatureMatrix{} : downsample_time(raw, k);
    const auto& m = k == 1 ? raw.values : ds.values;
    if (static_cast<std::size_t>(m.rows()) != shape.h ||
        static_cast<std::size_t>(m.cols()) != shape.w || shape.c != 1) {
      throw ShapeError("feature matrix " + data.metas.at(idx[i]).id + " is " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       ", model expects " + std::to_string(shape.h) + "x" + std::to_string(shape.w));
    }
    std::copy(m.data(), m.data() + per, x.data().data() + i * per);
  }
  return x;
}

std::vector<Tensor4<float>> make_targets(const labels::LabelScheme& scheme, const FeatureSet& data,
                                         std::span<const std::size_t> idx) {
  std::vector<Tensor4<float>> out;
  for (std::size_t h = 0; h < scheme.n_heads(); ++h) {
    out.emplace_back(Shape4{idx.size(), 1, 1, scheme.n_classes(h)});
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto targets = labels::encode(data.metas.at(idx[i]), scheme);
    for (std::size_t h = 0; h < targets.size(); ++h) {
      std::copy(targets[h].begin(), targets[h].end(), out[h].data().data() + i * targets[h].size());
    }
  }
  return out;
}

std::size_t row_argmax(const float* row, std::size_t begin, std::size_t end) {
  std::size_t best = begin;
  for (std::size_t j = begin + 1; j < end; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best - begin;
}

// Correct counts per head for a batch of outputs; multilabel16 counts joint
// correctness in its single slot.
std::vector<std::size_t> count_correct(const labels::LabelScheme& scheme,
                                       std::span<const Tensor4<float>> outputs,
                                       const FeatureSet& data, std::span<const std::size_t> idx) {
  std::vector<std::size_t> correct(scheme.n_heads(), 0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& meta = data.metas.at(idx[i]);
    if (scheme.is_multilabel()) {
      const float* row = outputs[0].data().data() + i * outputs[0].shape().c;
      const bool ok = row_argmax(row, 0, kNumScenes) == index_of(meta.scene) &&
                      row_argmax(row, kNumScenes, kNumScenes + kNumCities) == index_of(meta.city);
      correct[0] += ok ? 1 : 0;
      continue;
    }
    for (std::size_t h = 0; h < scheme.n_heads(); ++h) {
      const std::size_t c = outputs[h].shape().c;
      const float* row = outputs[h].data().data() + i * c;
      correct[h] += row_argmax(row, 0, c) == labels::class_index(meta, scheme, h) ? 1 : 0;
    }
  }
  return correct;
}

// Accumulates per-sample-weighted metrics over batches.
struct Tally {
  std::size_t n = 0;
  double loss = 0.0;
  std::vector<double> head_loss;
  std::vector<std::size_t> head_correct;

  explicit Tally(std::size_t heads) : head_loss(heads, 0.0), head_correct(heads, 0) {}

  void add(std::size_t batch, double total, std::span<const double> heads,
           std::span<const std::size_t> correct) {
    n += batch;
    loss += total * static_cast<double>(batch);
    for (std::size_t h = 0; h < heads.size(); ++h) {
      head_loss[h] += heads[h] * static_cast<double>(batch);
      head_correct[h] += correct[h];
    }
  }

  EpochLog finish(int epoch, std::string split, bool multitask) const {
    EpochLog e;
    e.epoch = epoch;
    e.split = std::move(split);
    const auto dn = static_cast<double>(n);
    e.loss = loss / dn;
    double acc_sum = 0.0;
    for (std::size_t h = 0; h < head_loss.size(); ++h) {
      const double acc = static_cast<double>(head_correct[h]) / dn;
      acc_sum += acc;
      if (multitask) {
        e.head_loss.push_back(head_loss[h] / dn);
        e.head_accuracy.push_back(acc);
      }
    }
    e.accuracy = acc_sum / static_cast<double>(head_loss.size());
    return e;
  }
};

double head_loss(const nnet::HeadSpec& head, const Tensor4<float>& out, const Tensor4<float>& target) {
  return head.loss == nnet::LossKind::kBinaryCrossEntropy
             ? nnet::binary_cross_entropy(out, target).value
             : nnet::categorical_cross_entropy(out, target).value;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// Inference over `data`; fills scores row-major per head and the tally.
Tally run_inference(TrainedModel& model, const FeatureSet& data, int batch_size,
                    std::vector<std::vector<double>>* scores) {
  const auto& scheme = *model.scheme;
  const auto& spec = model.network.spec();
  Tally tally(scheme.n_heads());
  const auto order = iota(data.size());
  for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(batch_size));
    const std::span<const std::size_t> idx(order.data() + b, e - b);
    const auto x = make_batch(data, idx, spec.input, model.time_downsample);
    const auto outputs = model.network.forward(x, Mode::kInference);
    const auto targets = make_targets(scheme, data, idx);
    std::vector<double> losses;
    double total = 0.0;
    for (std::size_t h = 0; h < outputs.size(); ++h) {
      losses.push_back(head_loss(spec.heads[h], outputs[h], targets[h]));
      total += spec.heads[h].weight * losses.back();
      if (scores) {
        auto& s = (*scores)[h];
        s.insert(s.end(), outputs[h].data().data(), outputs[h].data().data() + outputs[h].size());
      }
    }
    tally.add(idx.size(), total, losses, count_correct(scheme, outputs, data, idx));
  }
  return tally;
}

struct Snapshot {
  std::vector<std::vector<float>> params;
  std::vector<std::vector<float>> m, v, v_max;
  std::uint64_t t = 0;

  void capture(nnet::Network<float>& net, const nnet::Adam<float>& opt) {
    params.clear();
    for (const auto* p : net.parameters()) params.push_back(p->value);
    m = opt.first_moments();
    v = opt.second_moments();
    v_max = opt.max_second_moments();
    t = opt.iterations();
  }

  void restore(nnet::Network<float>& net, nnet::Adam<float>& opt) const {
    const auto ps = net.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = params[i];
    opt.first_moments() = m;
    opt.second_moments() = v;
    opt.max_second_moments() = v_max;
    opt.set_iterations(t);
  }
};

// Batch boundaries; a trailing batch of one sample joins the previous
// batch because batch norm needs two samples in training mode.
std::vector<std::size_t> batch_bounds(std::size_t n, std::size_t batch) {
  std::vector<std::size_t> bounds;
  for (std::size_t b = 0; b < n; b += batch) bounds.push_back(b);
  if (bounds.size() > 1 && n - bounds.back() == 1) bounds.pop_back();
  bounds.push_back(n);
  return bounds;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string model_tag(const TrainedModel& m) {
  return "scheme=" + m.scheme->name + "\ntime_downsample=" + std::to_string(m.time_downsample) + "\n";
}

}  // namespace

void ModelConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (time_downsample < 1) throw ConfigError("time downsample factor must be at least 1");
  check_weight(scene_weight, "scene loss weight");
  check_weight(city_weight, "city loss weight");
  adam.validate();
}

std::vector<LayerSpec> baseline_trunk(Architecture arch) {
  std::vector<LayerSpec> t = {
      LayerSpec::conv2d(32, {7, 7}),       LayerSpec::batch_norm(),
      LayerSpec::max_pool2d({5, 5}, 2),    LayerSpec::dropout(kDropout),
      LayerSpec::conv2d(64, {7, 7}),       LayerSpec::batch_norm(),
      LayerSpec::max_pool2d({4, 7}, 2),    LayerSpec::dropout(kDropout),
  };
  if (arch == Architecture::kTable2) {
    for (const auto& l : {LayerSpec::conv2d(128, {2, 2}), LayerSpec::batch_norm(),
                          LayerSpec::max_pool2d({5, 5}, 2), LayerSpec::dropout(kDropout)}) {
      t.push_back(l);
    }
  }
  t.push_back(LayerSpec::flatten());
  for (const auto& l : dense_block()) t.push_back(l);
  return t;
}

nnet::NetworkSpec build_baseline(std::size_t n_classes, nnet::Shape3 input, bool sigmoid,
                                 Architecture arch) {
  if (n_classes < 2) throw ConfigError("a classifier needs at least two classes");
  nnet::NetworkSpec spec;
  spec.input = input;
  spec.trunk = baseline_trunk(arch);
  spec.heads.push_back({"output", output_layers(n_classes, sigmoid),
                        sigmoid ? nnet::LossKind::kBinaryCrossEntropy
                                : nnet::LossKind::kCategoricalCrossEntropy,
                        1.0});
  validate_spec(spec);
  return spec;
}

nnet::NetworkSpec build_multitask(nnet::Shape3 input, double scene_weight, double city_weight,
                                  BranchPoint branch, Architecture arch) {
  check_weight(scene_weight, "scene loss weight");
  check_weight(city_weight, "city loss weight");
  nnet::NetworkSpec spec;
  spec.input = input;
  spec.trunk = baseline_trunk(arch);
  std::vector<LayerSpec> prefix;
  if (branch == BranchPoint::kAfterFlatten) {
    spec.trunk.resize(spec.trunk.size() - dense_block().size());
    prefix = dense_block();
  }
  auto head = [&](const char* name, std::size_t n, double w) {
    nnet::HeadSpec h{name, prefix, nnet::LossKind::kCategoricalCrossEntropy, w};
    for (const auto& l : output_layers(n, false)) h.layers.push_back(l);
    return h;
  };
  spec.heads.push_back(head("scene", kNumScenes, scene_weight));
  spec.heads.push_back(head("city", kNumCities, city_weight));
  validate_spec(spec);
  return spec;
}

nnet::NetworkSpec build_network(const ModelConfig& config) {
  const auto& scheme = labels::scheme(config.scheme);
  if (config.scheme == labels::SchemeId::kMultitask) {
    return build_multitask(config.input_shape, config.scene_weight, config.city_weight,
                           config.branch, config.architecture);
  }
  return build_baseline(scheme.n_classes(), config.input_shape, scheme.is_multilabel(),
                        config.architecture);
}

void FeatureSet::add(features::FeatureMatrix m, dataset::ClipMeta meta) {
  matrices.push_back(std::move(m));
  metas.push_back(std::move(meta));
}

FeatureSet FeatureSet::filter_scene(Scene scene) const {
  FeatureSet out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (metas[i].scene == scene) out.add(matrices[i], metas[i]);
  }
  return out;
}

features::FeatureMatrix downsample_time(const features::FeatureMatrix& m, int k) {
  if (k < 1) throw ConfigError("time downsample factor must be at least 1");
  if (k == 1) return m;
  const Eigen::Index frames = m.values.rows();
  const Eigen::Index out_frames = (frames + k - 1) / k;
  features::FeatureMatrix out{features::FloatMatrix::Zero(out_frames, m.values.cols())};
  for (Eigen::Index t = 0; t < out_frames; ++t) {
    const Eigen::Index begin = t * k;
    const Eigen::Index n = std::min<Eigen::Index>(k, frames - begin);
    out.values.row(t) = m.values.middleRows(begin, n).colwise().sum() / static_cast<float>(n);
  }
  return out;
}

TrainedModel train(const ModelConfig& config, const FeatureSet& train_set,
                   const FeatureSet& validation) {
  config.validate();
  if (train_set.empty()) throw EmptyInputError("training split is empty");
  ModelConfig cfg = config;
  if (cfg.input_shape.h == 0) cfg.input_shape = data_shape(train_set, cfg.time_downsample);
  const auto& scheme = labels::scheme(cfg.scheme);

  TrainedModel model{&scheme, cfg.seed, cfg.time_downsample,
                     nnet::Network<float>(build_network(cfg), cfg.seed),
                     nnet::Adam<float>(cfg.adam), {}};
  const bool multitask = scheme.n_heads() > 1;
  const auto bounds = batch_bounds(train_set.size(), static_cast<std::size_t>(cfg.batch_size));
  auto params = model.network.parameters();

  Snapshot last_good;
  last_good.capture(model.network, model.optimizer);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    try {
      std::vector<std::size_t> order = iota(train_set.size());
      Rng rng(derive_seed(cfg.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
      shuffle(order.begin(), order.end(), rng);

      Tally tally(scheme.n_heads());
      for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
        const std::span<const std::size_t> idx(order.data() + bounds[b], bounds[b + 1] - bounds[b]);
        const auto x = make_batch(train_set, idx, cfg.input_shape, cfg.time_downsample);
        const auto targets = make_targets(scheme, train_set, idx);
        const auto step = model.network.forward_backward(x, targets, Mode::kTrain);
        model.optimizer.step(params);
        tally.add(idx.size(), step.total, step.heads,
                  count_correct(scheme, step.outputs, train_set, idx));
      }
      for (const auto* p : params) {
        if (!std::all_of(p->value.begin(), p->value.end(), [](float v) { return std::isfinite(v); })) {
          throw NumericError("parameter '" + p->name + "' became non-finite");
        }
      }
      model.training_log.push_back(tally.finish(epoch, "train", multitask));
      if (!validation.empty()) {
        const Tally v = run_inference(model, validation, cfg.batch_size, nullptr);
        if (!std::isfinite(v.loss)) throw NumericError("non-finite validation loss");
        model.training_log.push_back(v.finish(epoch, "validation", multitask));
      }
      if (cfg.on_epoch) {
        for (const auto& e : model.training_log) {
          if (e.epoch == epoch) cfg.on_epoch(e);
        }
      }
    } catch (const NumericError& e) {
      last_good.restore(model.network, model.optimizer);
      while (!model.training_log.empty() && model.training_log.back().epoch == epoch) {
        model.training_log.pop_back();
      }
      throw TrainingAborted("training stopped in epoch " + std::to_string(epoch) + ": " + e.what(),
                            std::make_shared<TrainedModel>(std::move(model)));
    }
    last_good.capture(model.network, model.optimizer);
  }
  return model;
}

std::uint64_t scene_seed(std::uint64_t base, Scene scene) {
  return derive_seed(base, kSceneStream, index_of(scene));
}

std::map<Scene, TrainedModel> train_scene_specific(const ModelConfig& config,
                                                   const FeatureSet& train_set,
                                                   const FeatureSet& validation, int parallel) {
  config.validate();
  std::vector<FeatureSet> per_scene;
  for (Scene s : kAllScenes) {
    per_scene.push_back(train_set.filter_scene(s));
    if (per_scene.back().empty()) {
      throw StratumError("no training clips for scene " + std::string(to_string(s)));
    }
  }
  std::vector<std::optional<TrainedModel>> models(kNumScenes);
  std::vector<std::exception_ptr> errors(kNumScenes);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < kNumScenes; i = next++) {
      try {
        ModelConfig cfg = config;
        cfg.scheme = labels::SchemeId::kCity6;
        cfg.seed = scene_seed(config.seed, kAllScenes[i]);
        models[i].emplace(train(cfg, per_scene[i], validation.filter_scene(kAllScenes[i])));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(parallel, static_cast<int>(kNumScenes)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::map<Scene, TrainedModel> out;
  for (std::size_t i = 0; i < kNumScenes; ++i) out.emplace(kAllScenes[i], std::move(*models[i]));
  return out;
}

std::vector<eval::PredictionMatrix> predict(TrainedModel& model, const FeatureSet& data,
                                            int batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  const auto& scheme = *model.scheme;
  std::vector<std::vector<double>> scores(scheme.n_heads());
  if (!data.empty()) run_inference(model, data, batch_size, &scores);
  std::vector<eval::PredictionMatrix> out;
  for (std::size_t h = 0; h < scheme.n_heads(); ++h) {
    eval::PredictionMatrix p;
    p.scheme = scheme.id;
    p.head = h;
    const auto cols = static_cast<Eigen::Index>(scheme.n_classes(h));
    p.scores = features::RealMatrix::Zero(static_cast<Eigen::Index>(data.size()), cols);
    std::copy(scores[h].begin(), scores[h].end(), p.scores.data());
    for (const auto& m : data.metas) p.sample_ids.push_back(m.id);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::vector<std::size_t>> truth_indices(const labels::LabelScheme& scheme,
                                                    const FeatureSet& data) {
  std::vector<std::vector<std::size_t>> out(scheme.is_multilabel() ? 2 : scheme.n_heads());
  for (const auto& meta : data.metas) {
    if (scheme.is_multilabel()) {
      out[0].push_back(index_of(meta.scene));
      out[1].push_back(index_of(meta.city));
      continue;
    }
    for (std::size_t h = 0; h < scheme.n_heads(); ++h) {
      out[h].push_back(labels::class_index(meta, scheme, h));
    }
  }
  return out;
}

double log_accuracy(const labels::LabelScheme& scheme,
                    std::span<const eval::PredictionMatrix> predictions, const FeatureSet& data) {
  const auto truth = truth_indices(scheme, data);
  if (scheme.is_multilabel()) {
    return eval::multilabel_evaluate(predictions[0], truth[0], truth[1]).joint;
  }
  double sum = 0.0;
  for (std::size_t h = 0; h < scheme.n_heads(); ++h) sum += eval::accuracy(predictions[h], truth[h]);
  return sum / static_cast<double>(scheme.n_heads());
}

void save_model(const std::filesystem::path& path, TrainedModel& model) {
  nnet::save_checkpoint(path, model_tag(model), model.seed, model.network, model.optimizer);
}

TrainedModel load_model(const std::filesystem::path& path) {
  auto ckpt = nnet::load_checkpoint(path);
  std::istringstream tag(ckpt.tag);
  std::string line;
  const labels::LabelScheme* scheme = nullptr;
  int downsample = 1;
  while (std::getline(tag, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "scheme") {
      scheme = &labels::scheme_from_name(value);
    } else if (key == "time_downsample") {
      try {
        downsample = std::stoi(value);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad time_downsample '" + value + "'");
      }
      if (downsample < 1) throw FormatError(path.string() + ": bad time_downsample '" + value + "'");
    }
  }
  if (scheme == nullptr) throw FormatError(path.string() + ": checkpoint has no label scheme");
  const auto trace = nnet::infer_shapes(ckpt.network.spec());
  if (trace.heads.size() != scheme->n_heads()) {
    throw SchemeError(path.string() + ": head count does not match scheme " + scheme->name);
  }
  for (std::size_t h = 0; h < trace.heads.size(); ++h) {
    if (trace.heads[h].back().c != scheme->n_classes(h)) {
      throw SchemeError(path.string() + ": head width does not match scheme " + scheme->name);
    }
  }
  return TrainedModel{scheme, ckpt.seed, downsample, std::move(ckpt.network),
                      std::move(ckpt.optimizer), {}};
}

std::string format_training_log(const TrainedModel& model) {
  std::ostringstream out;
  const bool multitask = model.scheme->n_heads() > 1;
  if (multitask) {
    out << "epoch,split,loss,scene_loss,scene_accuracy,city_loss,city_accuracy\n";
  } else {
    out << "epoch,split,loss,accuracy\n";
  }
  for (const auto& e : model.training_log) {
    out << e.epoch << ',' << e.split << ',' << fmt(e.loss);
    if (multitask) {
      for (std::size_t h = 0; h < e.head_loss.size(); ++h) {
        out << ',' << fmt(e.head_loss[h]) << ',' << fmt(e.head_accuracy[h]);
      }
    } else {
      out << ',' << fmt(e.accuracy);
    }
    out << '\n';
  }
  return out.str();
}

void write_training_log(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << format_training_log(model);
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace citysound::models
