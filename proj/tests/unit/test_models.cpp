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

#include <cmath>
#include <limits>
#include <random>

#include "citysound/errors.hpp"
#include "citysound/models.hpp"
#include "citysound/nnet/checkpoint.hpp"
#include "padding.hpp"
#include "test_support.hpp"

namespace citysound::models {
namespace {

using labels::SchemeId;
using nnet::LayerKind;
using nnet::Shape3;
using nnet::Shape4;

// Learnable toy features: the city lights a band of bins, the scene a band
// of frames.
FeatureSet toy_set(int per_pair, std::uint64_t seed, std::size_t frames = 16, std::size_t bins = 16) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> noise(0.0f, 0.3f);
  FeatureSet set;
  int seg = 0;
  for (Scene s : kAllScenes) {
    for (City c : kAllCities) {
      for (int r = 0; r < per_pair; ++r) {
        features::FeatureMatrix m;
        m.values.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));
        for (Eigen::Index t = 0; t < m.values.rows(); ++t) {
          for (Eigen::Index b = 0; b < m.values.cols(); ++b) {
            float v = noise(gen);
            if (static_cast<std::size_t>(b) / 2 == index_of(c)) v += 2.0f;
            if (static_cast<std::size_t>(t) * kNumScenes / frames == index_of(s)) v += 2.0f;
            m.values(t, b) = v;
          }
        }
        set.add(std::move(m), dataset::parse_clip_name(dataset::format_clip_name(s, c, r, seg++, "a")));
      }
    }
  }
  return set;
}

std::vector<Shape4> pool_outputs(const nnet::NetworkSpec& spec) {
  const auto trace = nnet::infer_shapes(spec);
  std::vector<Shape4> out;
  for (std::size_t i = 0; i < spec.trunk.size(); ++i) {
    if (spec.trunk[i].kind == LayerKind::kMaxPool2d) out.push_back(trace.trunk[i]);
  }
  return out;
}

TEST(ShapeAudit, FullScaleInput) {
  const auto spec = build_baseline(6, {938, 128, 1});
  const auto pools = pool_outputs(spec);
  ASSERT_EQ(pools.size(), 3u);
  // Oracle: enumerate pool windows over the unchanged conv outputs.
  std::size_t h = 938, w = 128;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& pool = spec.trunk[i * 4 + 2];
    h = oracle::enumerate_same(h, static_cast<std::size_t>(pool.window.h), static_cast<std::size_t>(pool.stride)).out;
    w = oracle::enumerate_same(w, static_cast<std::size_t>(pool.window.w), static_cast<std::size_t>(pool.stride)).out;
    EXPECT_EQ(pools[i].h, h);
    EXPECT_EQ(pools[i].w, w);
  }
  EXPECT_EQ(pools[0], (Shape4{1, 469, 64, 32}));
  EXPECT_EQ(pools[1], (Shape4{1, 235, 32, 64}));
  EXPECT_EQ(pools[2], (Shape4{1, 118, 16, 128}));
  const auto trace = nnet::infer_shapes(spec);
  for (std::size_t i = 0; i < spec.trunk.size(); ++i) {
    if (spec.trunk[i].kind == LayerKind::kFlatten) EXPECT_EQ(trace.trunk[i].c, 241664u);
  }
  EXPECT_EQ(trace.heads[0].back().c, 6u);
  EXPECT_EQ(spec.heads[0].layers.back().kind, LayerKind::kSoftmax);
}

TEST(ShapeAudit, EveryInputSizeMatchesSamePadding) {
  for (std::size_t frames = 32; frames <= 64; ++frames) {
    for (std::size_t bins = 16; bins <= 32; ++bins) {
      const auto spec = build_baseline(6, {frames, bins, 1});
      const auto trace = nnet::infer_shapes(spec);
      std::size_t h = frames, w = bins, c = 1;
      for (std::size_t i = 0; i < spec.trunk.size(); ++i) {
        const auto& l = spec.trunk[i];
        switch (l.kind) {
          case LayerKind::kConv2d:
            c = static_cast<std::size_t>(l.units);
            break;
          case LayerKind::kMaxPool2d:
            h = oracle::enumerate_same(h, static_cast<std::size_t>(l.window.h), static_cast<std::size_t>(l.stride)).out;
            w = oracle::enumerate_same(w, static_cast<std::size_t>(l.window.w), static_cast<std::size_t>(l.stride)).out;
            break;
          case LayerKind::kFlatten:
            c = h * w * c;
            h = w = 1;
            break;
          case LayerKind::kDense:
            c = static_cast<std::size_t>(l.units);
            break;
          default:
            break;
        }
        ASSERT_EQ(trace.trunk[i], (Shape4{1, h, w, c})) << frames << "x" << bins << " layer " << i;
      }
    }
  }
}

TEST(ShapeAudit, TrunkMatchesLayerTable) {
  using nnet::LayerSpec;
  const std::vector<LayerSpec> want = {
      LayerSpec::conv2d(32, {7, 7}), LayerSpec::batch_norm(), LayerSpec::max_pool2d({5, 5}, 2), LayerSpec::dropout(0.3),
      LayerSpec::conv2d(64, {7, 7}), LayerSpec::batch_norm(), LayerSpec::max_pool2d({4, 7}, 2), LayerSpec::dropout(0.3),
      LayerSpec::conv2d(128, {2, 2}), LayerSpec::batch_norm(), LayerSpec::max_pool2d({5, 5}, 2), LayerSpec::dropout(0.3),
      LayerSpec::flatten(), LayerSpec::dense(64), LayerSpec::relu(), LayerSpec::dropout(0.3), LayerSpec::batch_norm()};
  EXPECT_EQ(baseline_trunk(), want);
  const auto bench = baseline_trunk(Architecture::kBenchmark);
  EXPECT_EQ(bench.size(), want.size() - 4);
  for (const auto& l : bench) EXPECT_FALSE(l.kind == LayerKind::kConv2d && l.units == 128);
}

TEST(ShapeAudit, HeadWidthsPerScheme) {
  const std::pair<SchemeId, std::vector<std::size_t>> cases[] = {
      {SchemeId::kCity6, {6}},        {SchemeId::kScene10, {10}},      {SchemeId::kPair60, {60}},
      {SchemeId::kGrouped3, {3}},     {SchemeId::kGroupedPair18, {18}}, {SchemeId::kMultilabel16, {16}},
      {SchemeId::kMultitask, {10, 6}}};
  for (const auto& [id, widths] : cases) {
    ModelConfig cfg;
    cfg.scheme = id;
    cfg.input_shape = {938, 128, 1};
    const auto spec = build_network(cfg);
    const auto trace = nnet::infer_shapes(spec);
    ASSERT_EQ(spec.heads.size(), widths.size());
    for (std::size_t h = 0; h < widths.size(); ++h) {
      EXPECT_EQ(trace.heads[h].back().c, widths[h]) << labels::scheme(id).name;
      const bool sigmoid = id == SchemeId::kMultilabel16;
      EXPECT_EQ(spec.heads[h].layers.back().kind, sigmoid ? LayerKind::kSigmoid : LayerKind::kSoftmax);
      EXPECT_EQ(spec.heads[h].loss, sigmoid ? nnet::LossKind::kBinaryCrossEntropy
                                            : nnet::LossKind::kCategoricalCrossEntropy);
    }
  }
}

TEST(Multitask, HeadsAndWeights) {
  const auto spec = build_multitask({938, 128, 1});
  ASSERT_EQ(spec.heads.size(), 2u);
  EXPECT_EQ(spec.heads[0].name, "scene");
  EXPECT_EQ(spec.heads[1].name, "city");
  EXPECT_DOUBLE_EQ(spec.heads[0].weight / spec.heads[1].weight, 10.0 / 6.0);
  EXPECT_EQ(spec.trunk, baseline_trunk());
  const auto flat = build_multitask({938, 128, 1}, 0.5, 0.3, BranchPoint::kAfterFlatten);
  EXPECT_EQ(flat.trunk.back().kind, LayerKind::kFlatten);
  EXPECT_EQ(flat.heads[0].layers.front(), nnet::LayerSpec::dense(64));
  EXPECT_THROW(build_multitask({938, 128, 1}, -1.0, 0.3), ConfigError);
}

TEST(BuildNetwork, Errors) {
  EXPECT_THROW(build_baseline(1, {938, 128, 1}), ConfigError);
  EXPECT_THROW(build_baseline(6, {8, 8, 1}), ShapeError);
  ModelConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.city_weight = std::numeric_limits<double>::infinity();
  EXPECT_THROW(cfg.validate(), ConfigError);
  FeatureSet empty;
  EXPECT_THROW(train(ModelConfig{}, empty), EmptyInputError);
}

// With city weight 0, one multitask step and one scene10 baseline step on the
// same batch give the same scene-head and trunk gradients (scaled by w).
TEST(Multitask, DegeneratesToSingleTask) {
  const Shape3 in{24, 20, 1};
  const FeatureSet data = toy_set(1, 3, 24, 20);
  for (double w : {1.0, 0.5, 0.7}) {
    nnet::Network<double> single(build_baseline(10, in), 9);
    nnet::Network<double> multi(build_multitask(in, w, 0.0), 9);
    nnet::Tensor4<double> x({8, 24, 20, 1});
    nnet::Tensor4<double> ts({8, 1, 1, 10}), tc({8, 1, 1, 6});
    for (std::size_t n = 0; n < 8; ++n) {
      const auto& m = data.matrices[n * 7];
      for (std::size_t i = 0; i < 24 * 20; ++i) x.sample(n)[i] = m.values.data()[i];
      ts(n, 0, 0, index_of(data.metas[n * 7].scene)) = 1;
      tc(n, 0, 0, index_of(data.metas[n * 7].city)) = 1;
    }
    const std::vector<nnet::Tensor4<double>> t1 = {ts}, t2 = {ts, tc};
    single.forward_backward(x, t1, nnet::Mode::kTrain);
    multi.forward_backward(x, t2, nnet::Mode::kTrain);
    const auto ps = single.parameters(), pm = multi.parameters();
    ASSERT_GT(pm.size(), ps.size());
    double worst = 0;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      if (!ps[k]->trainable) continue;
      for (std::size_t i = 0; i < ps[k]->grad.size(); ++i) {
        worst = std::max(worst, std::abs(w * ps[k]->grad[i] - pm[k]->grad[i]));
      }
    }
    EXPECT_LE(worst, 1e-12) << "w " << w;
    for (std::size_t k = ps.size(); k < pm.size(); ++k) {
      for (double g : pm[k]->grad) EXPECT_EQ(g, 0.0);
    }
  }
}

std::size_t trunk_parameter_count(nnet::Network<double>& net) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < net.spec().trunk.size(); ++i) n += net.trunk_layer(i).parameters().size();
  return n;
}

TEST(Multitask, DegeneratesToCityTask) {
  const Shape3 in{24, 20, 1};
  const FeatureSet data = toy_set(1, 4, 24, 20);
  for (double w : {1.0, 0.3}) {
    // The city head is head 1 of the multitask network, so its weights are
    // copied into the single-task head before comparing trunk gradients.
    nnet::Network<double> single(build_baseline(6, in), 9);
    nnet::Network<double> multi(build_multitask(in, 0.0, w), 9);
    {
      const auto ps = single.parameters(), pm = multi.parameters();
      const std::size_t head = trunk_parameter_count(single);
      for (std::size_t j = head; j < ps.size(); ++j) ps[j]->value = pm[pm.size() - ps.size() + j]->value;
    }
    nnet::Tensor4<double> x({8, 24, 20, 1});
    nnet::Tensor4<double> ts({8, 1, 1, 10}), tc({8, 1, 1, 6});
    for (std::size_t n = 0; n < 8; ++n) {
      const auto& m = data.matrices[n * 7];
      for (std::size_t i = 0; i < 24 * 20; ++i) x.sample(n)[i] = m.values.data()[i];
      ts(n, 0, 0, index_of(data.metas[n * 7].scene)) = 1;
      tc(n, 0, 0, index_of(data.metas[n * 7].city)) = 1;
    }
    const std::vector<nnet::Tensor4<double>> t1 = {tc}, t2 = {ts, tc};
    single.forward_backward(x, t1, nnet::Mode::kTrain);
    multi.forward_backward(x, t2, nnet::Mode::kTrain);
    const auto ps = single.parameters(), pm = multi.parameters();
    const std::size_t n_trunk = trunk_parameter_count(single);
    double worst = 0;
    for (std::size_t k = 0; k < n_trunk; ++k) {
      if (!ps[k]->trainable) continue;
      for (std::size_t i = 0; i < ps[k]->grad.size(); ++i) {
        worst = std::max(worst, std::abs(w * ps[k]->grad[i] - pm[k]->grad[i]));
      }
    }
    EXPECT_LE(worst, 1e-12) << "w " << w;
  }
}

ModelConfig quick(SchemeId id, int epochs) {
  ModelConfig cfg;
  cfg.scheme = id;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  cfg.seed = 5;
  cfg.adam.lr = 0.003;
  return cfg;
}

TEST(Train, DeterministicLogs) {
  const FeatureSet data = toy_set(1, 1);
  const FeatureSet val = toy_set(1, 2);
  auto a = train(quick(SchemeId::kCity6, 2), data, val);
  auto b = train(quick(SchemeId::kCity6, 2), data, val);
  EXPECT_EQ(format_training_log(a), format_training_log(b));
  ASSERT_EQ(a.training_log.size(), 4u);
  EXPECT_EQ(a.training_log[1].split, "validation");
  auto ck_a = nnet::encode_checkpoint("x", 1, a.network, a.optimizer);
  auto ck_b = nnet::encode_checkpoint("x", 1, b.network, b.optimizer);
  EXPECT_EQ(ck_a, ck_b);
}

TEST(Train, MemorisationLossFallsBelowBound) {
  FeatureSet data;
  const FeatureSet pool = toy_set(1, 9, 16, 16);
  for (std::size_t i = 0; i < 32; ++i) data.add(pool.matrices[i], pool.metas[i]);
  auto cfg = quick(SchemeId::kCity6, 300);
  cfg.batch_size = 8;
  cfg.adam.lr = 0.001;
  double best = std::numeric_limits<double>::infinity();
  int reached = 0;
  cfg.on_epoch = [&](const EpochLog& e) {
    if (e.loss < 0.05 && reached == 0) reached = e.epoch;
    best = std::min(best, e.loss);
  };
  train(cfg, data);
  EXPECT_GT(reached, 0) << "best loss " << best;
}

TEST(Train, CallbackSeesEveryRow) {
  auto cfg = quick(SchemeId::kMultitask, 2);
  std::vector<std::string> seen;
  cfg.on_epoch = [&](const EpochLog& e) { seen.push_back(std::to_string(e.epoch) + e.split); };
  const auto model = train(cfg, toy_set(1, 1), toy_set(1, 2));
  EXPECT_EQ(seen, (std::vector<std::string>{"1train", "1validation", "2train", "2validation"}));
  ASSERT_EQ(model.training_log[0].head_accuracy.size(), 2u);
  EXPECT_DOUBLE_EQ(model.training_log[0].accuracy,
                   (model.training_log[0].head_accuracy[0] + model.training_log[0].head_accuracy[1]) / 2);
  const std::string log = format_training_log(model);
  EXPECT_EQ(log.substr(0, log.find('\n')),
            "epoch,split,loss,scene_loss,scene_accuracy,city_loss,city_accuracy");
}

TEST(Train, NonFiniteInputAborts) {
  FeatureSet data = toy_set(1, 1);
  data.matrices[3].values(0, 0) = std::numeric_limits<float>::quiet_NaN();
  try {
    train(quick(SchemeId::kCity6, 3), data);
    FAIL() << "no TrainingAborted";
  } catch (const TrainingAborted& e) {
    ASSERT_TRUE(e.model());
    EXPECT_TRUE(e.model()->training_log.empty());
    for (auto* p : e.model()->network.parameters()) {
      for (float v : p->value) ASSERT_TRUE(std::isfinite(v));
    }
  }
}

TEST(Predict, RowProperties) {
  FeatureSet data = toy_set(1, 6);
  data.add(data.matrices[0], data.metas[0]);
  for (SchemeId id : {SchemeId::kCity6, SchemeId::kMultilabel16, SchemeId::kMultitask}) {
    auto model = train(quick(id, 1), data);
    const auto preds = predict(model, data, 7);
    ASSERT_EQ(preds.size(), labels::scheme(id).n_heads());
    for (const auto& p : preds) {
      ASSERT_EQ(p.rows(), data.size());
      EXPECT_EQ(p.sample_ids.front(), data.metas.front().id);
      EXPECT_EQ(p.scores.row(0), p.scores.row(static_cast<Eigen::Index>(data.size() - 1)));
      for (Eigen::Index i = 0; i < p.scores.rows(); ++i) {
        if (id == SchemeId::kMultilabel16) {
          EXPECT_GT(p.scores.row(i).minCoeff(), 0.0);
          EXPECT_LT(p.scores.row(i).maxCoeff(), 1.0);
        } else {
          EXPECT_NEAR(p.scores.row(i).sum(), 1.0, 1e-6);
        }
      }
    }
    // Batch composition does not change inference.
    const auto again = predict(model, data, 32);
    for (std::size_t h = 0; h < preds.size(); ++h) EXPECT_EQ(again[h].scores, preds[h].scores);
  }
}

TEST(SceneSpecific, TenCityModels) {
  const FeatureSet data = toy_set(2, 8);
  auto cfg = quick(SchemeId::kScene10, 1);
  const auto models = train_scene_specific(cfg, data, {}, 2);
  ASSERT_EQ(models.size(), 10u);
  for (const auto& [scene, m] : models) {
    EXPECT_EQ(m.scheme->id, SchemeId::kCity6);
    EXPECT_EQ(m.seed, scene_seed(cfg.seed, scene));
    EXPECT_EQ(nnet::infer_shapes(m.spec()).heads[0].back().c, 6u);
  }
  EXPECT_EQ(data.filter_scene(Scene::kPark).size(), 12u);
  // Thread count does not change the result.
  auto serial = train_scene_specific(cfg, data, {}, 1);
  auto parallel = train_scene_specific(cfg, data, {}, 3);
  for (Scene s : kAllScenes) {
    EXPECT_EQ(format_training_log(serial.at(s)), format_training_log(parallel.at(s)));
  }
  FeatureSet missing;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.metas[i].scene != Scene::kBus) missing.add(data.matrices[i], data.metas[i]);
  }
  EXPECT_THROW(train_scene_specific(cfg, missing), StratumError);
}

TEST(DownsampleTime, GroupMeans) {
  features::FeatureMatrix m;
  m.values.resize(5, 1);
  m.values << 1, 3, 5, 7, 10;
  const auto d = downsample_time(m, 2);
  ASSERT_EQ(d.n_frames(), 3u);
  EXPECT_FLOAT_EQ(d.values(0, 0), 2.0f);
  EXPECT_FLOAT_EQ(d.values(1, 0), 6.0f);
  EXPECT_FLOAT_EQ(d.values(2, 0), 10.0f);
  EXPECT_EQ(downsample_time(m, 1).values, m.values);
  EXPECT_THROW(downsample_time(m, 0), ConfigError);
}

TEST(Persistence, SaveLoadRoundTrip) {
  testing::TempDir dir("cs-model");
  const FeatureSet data = toy_set(1, 2, 32, 16);
  auto cfg = quick(SchemeId::kGrouped3, 1);
  cfg.time_downsample = 2;
  auto model = train(cfg, data);
  save_model(dir / "m.csnn", model);
  auto back = load_model(dir / "m.csnn");
  EXPECT_EQ(back.scheme->id, SchemeId::kGrouped3);
  EXPECT_EQ(back.time_downsample, 2);
  EXPECT_EQ(back.seed, model.seed);
  EXPECT_EQ(predict(back, data)[0].scores, predict(model, data)[0].scores);
  write_training_log(dir / "log.csv", model);
  EXPECT_EQ(testing::read_text(dir / "log.csv"), format_training_log(model));
  // A checkpoint whose tag names a scheme of a different width.
  nnet::save_checkpoint(dir / "bad.csnn", "scheme=city6\ntime_downsample=1\n", 1, model.network,
                        model.optimizer);
  EXPECT_THROW(load_model(dir / "bad.csnn"), SchemeError);
  nnet::save_checkpoint(dir / "notag.csnn", "", 1, model.network, model.optimizer);
  EXPECT_THROW(load_model(dir / "notag.csnn"), FormatError);
}

}  // namespace
}  // namespace citysound::models
