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

#include "citysound/cli/commands.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "citysound/errors.hpp"
#include "citysound/evaluation.hpp"
#include "citysound/feature_cache.hpp"
#include "citysound/wav.hpp"

namespace citysound::cli {
namespace fs = std::filesystem;

namespace {

std::mutex g_log_mutex;

void note(bool quiet, const std::string& msg) {
  if (quiet) return;
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << msg << '\n';
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& where) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(where + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

const char* subset_name(int s) {
  static const char* names[] = {"train", "validation", "test"};
  return names[s];
}

void check_subset(const std::string& subset) {
  if (subset != "train" && subset != "validation" && subset != "test") {
    throw ConfigError("unknown split '" + subset + "' (expected train, validation or test)");
  }
}

std::string target_of(const labels::LabelScheme& s, std::size_t head) {
  switch (s.id) {
    case labels::SchemeId::kCity6:
      return "city";
    case labels::SchemeId::kScene10:
    case labels::SchemeId::kGrouped3:
      return "scene";
    case labels::SchemeId::kMultitask:
      return head == 0 ? "scene" : "city";
    default:
      return "both";
  }
}

fs::path slot_checkpoint(const fs::path& models_dir, Experiment e, const ModelSlot& slot) {
  return models_dir / experiment_name(e) / (slot.name + ".csnn");
}

fs::path slot_log(const fs::path& models_dir, Experiment e, const ModelSlot& slot) {
  return models_dir / experiment_name(e) / (slot.name + "_log.csv");
}

std::string describe(const models::EpochLog& e, const std::string& who) {
  std::string s = who + " epoch " + std::to_string(e.epoch) + " " + e.split + " loss " + fixed(e.loss);
  if (e.head_accuracy.empty()) {
    s += " acc " + fixed(e.accuracy);
  } else {
    s += " scene acc " + fixed(e.head_accuracy[0]) + " city acc " + fixed(e.head_accuracy[1]);
  }
  return s;
}

// Reports for one model on one subset; returns the rows it contributes.
struct SlotReport {
  std::vector<std::pair<std::string, double>> summary;
  std::vector<ResultRow> rows;
};

void write_summary(const fs::path& path, const std::vector<std::pair<std::string, double>>& summary) {
  std::string text = "metric,value\n";
  for (const auto& [k, v] : summary) text += k + "," + exact(v) + "\n";
  write_text(path, text);
}

void write_confusion_bundle(const fs::path& dir, const std::string& stem,
                            const eval::ConfusionMatrix& cm, std::size_t threshold) {
  eval::write_confusion_csv(dir / (stem + ".csv"), cm);
  eval::write_confusion_pgm(dir / (stem + ".pgm"), cm);
  // "confusion_city" -> "noteworthy_confusions_city.csv"
  eval::write_noteworthy_confusions(dir / ("noteworthy_confusions" + stem.substr(9) + ".csv"), cm,
                                    threshold);
}

std::vector<std::string> component_names(const labels::LabelScheme& s) {
  std::vector<std::string> out;
  if (s.id == labels::SchemeId::kPair60) {
    for (Scene sc : kAllScenes) out.emplace_back(to_string(sc));
  } else {
    for (auto g : {labels::SceneGroup::kIndoor, labels::SceneGroup::kOutdoor,
                   labels::SceneGroup::kTransport}) {
      out.emplace_back(labels::to_string(g));
    }
  }
  return out;
}

std::vector<std::string> city_names() {
  std::vector<std::string> out;
  for (City c : kAllCities) out.emplace_back(to_string(c));
  return out;
}

std::vector<std::string> scene_names() {
  std::vector<std::string> out;
  for (Scene s : kAllScenes) out.emplace_back(to_string(s));
  return out;
}

SlotReport report_model(models::TrainedModel& model, const models::FeatureSet& data,
                        const fs::path& dir, const EvaluateOptions& opt) {
  make_dirs(dir);
  const auto& scheme = *model.scheme;
  const auto preds = models::predict(model, data);
  const auto truth = models::truth_indices(scheme, data);
  SlotReport r;

  if (scheme.is_multilabel()) {
    const auto ml = eval::multilabel_evaluate(preds[0], truth[0], truth[1], opt.threshold);
    r.summary = {{"scene_accuracy", ml.scene}, {"city_accuracy", ml.city}, {"joint_accuracy", ml.joint},
                 {"threshold", opt.threshold}};
    eval::write_binarized_csv(dir / "binarized.csv", ml, preds[0].sample_ids, scheme.class_names[0]);
    const auto scene_cm = eval::confusion(eval::argmax_rows(preds[0].scores, 0, kNumScenes), truth[0],
                                          scene_names());
    const auto city_cm = eval::confusion(
        eval::argmax_rows(preds[0].scores, kNumScenes, kNumScenes + kNumCities), truth[1], city_names());
    write_confusion_bundle(dir, "confusion_scene", scene_cm, opt.confusion_threshold);
    write_confusion_bundle(dir, "confusion_city", city_cm, opt.confusion_threshold);
    eval::write_per_class_csv(dir / "per_class_scene.csv", eval::per_class_accuracy(scene_cm));
    eval::write_per_class_csv(dir / "per_class_city.csv", eval::per_class_accuracy(city_cm));
    r.rows = {{scheme.name, ml.joint, "both", 16}, {scheme.name, ml.scene, "scene", 10},
              {scheme.name, ml.city, "city", 6}};
  } else if (scheme.is_pair()) {
    const auto pm = eval::pair_marginals(preds[0], truth[0]);
    const char* comp = scheme.id == labels::SchemeId::kPair60 ? "scene_accuracy" : "group_accuracy";
    r.summary = {{"city_accuracy", pm.city}, {comp, pm.component}, {"joint_accuracy", pm.joint}};
    const auto cm = eval::confusion(preds[0], truth[0]);
    write_confusion_bundle(dir, "confusion", cm, opt.confusion_threshold);
    eval::write_per_class_csv(dir / "per_class.csv", eval::per_class_accuracy(cm));
    // Marginal confusions over the decoded components.
    std::vector<std::size_t> pc, tc, pk, tk;
    for (std::size_t i = 0; i < truth[0].size(); ++i) {
      const auto p = labels::decode(eval::argmax_rows(preds[0].scores)[i], scheme);
      const auto t = labels::decode(truth[0][i], scheme);
      pc.push_back(index_of(*p.city));
      tc.push_back(index_of(*t.city));
      if (scheme.id == labels::SchemeId::kPair60) {
        pk.push_back(index_of(*p.scene));
        tk.push_back(index_of(*t.scene));
      } else {
        pk.push_back(labels::index_of(*p.group));
        tk.push_back(labels::index_of(*t.group));
      }
    }
    write_confusion_bundle(dir, "confusion_city", eval::confusion(pc, tc, city_names()),
                           opt.confusion_threshold);
    write_confusion_bundle(dir, "confusion_component", eval::confusion(pk, tk, component_names(scheme)),
                           opt.confusion_threshold);
    r.rows = {{scheme.name, pm.joint, "both", scheme.n_classes()}};
  } else {
    for (std::size_t h = 0; h < scheme.n_heads(); ++h) {
      const double acc = eval::accuracy(preds[h], truth[h]);
      const std::string suffix = scheme.n_heads() > 1 ? "_" + target_of(scheme, h) : "";
      r.summary.emplace_back(scheme.n_heads() > 1 ? target_of(scheme, h) + "_accuracy" : "accuracy", acc);
      const auto cm = eval::confusion(preds[h], truth[h]);
      write_confusion_bundle(dir, "confusion" + suffix, cm, opt.confusion_threshold);
      eval::write_per_class_csv(dir / ("per_class" + suffix + ".csv"), eval::per_class_accuracy(cm));
      r.rows.push_back({scheme.name, acc, target_of(scheme, h), scheme.n_classes(h)});
    }
  }
  write_summary(dir / "summary.csv", r.summary);
  return r;
}

models::TrainedModel load_slot(const fs::path& path, const ModelSlot& slot) {
  auto model = models::load_model(path);
  if (model.scheme->id != slot.scheme) {
    throw SchemeError("checkpoint '" + path.string() + "' holds a " + model.scheme->name +
                      " model, expected " + labels::scheme(slot.scheme).name);
  }
  return model;
}

}  // namespace

// ------------------------------------------------------------ experiments

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::kBenchmarkScene10:
      return "benchmark_scene10";
    case Experiment::kCity6:
      return "city6";
    case Experiment::kScenePriors:
      return "scene_priors";
    case Experiment::kPair60:
      return "pair60";
    case Experiment::kGrouped3:
      return "grouped3";
    case Experiment::kGroupedPair18:
      return "grouped_pair18";
    case Experiment::kMultilabel16:
      return "multilabel16";
    case Experiment::kMultitask:
      return "multitask";
  }
  throw ConfigError("unknown experiment");
}

Experiment parse_experiment(const std::string& name) {
  for (Experiment e : kAllExperiments) {
    if (experiment_name(e) == name) return e;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

std::vector<ModelSlot> experiment_models(Experiment e) {
  using labels::SchemeId;
  switch (e) {
    case Experiment::kBenchmarkScene10:
      return {{"benchmark", SchemeId::kScene10, models::Architecture::kBenchmark, {}},
              {"extra_layer", SchemeId::kScene10, models::Architecture::kTable2, {}}};
    case Experiment::kScenePriors: {
      std::vector<ModelSlot> slots;
      for (Scene s : kAllScenes) {
        slots.push_back({std::string(to_string(s)), SchemeId::kCity6, models::Architecture::kTable2, s});
      }
      return slots;
    }
    case Experiment::kCity6:
      return {{"model", SchemeId::kCity6, models::Architecture::kTable2, {}}};
    case Experiment::kPair60:
      return {{"model", SchemeId::kPair60, models::Architecture::kTable2, {}}};
    case Experiment::kGrouped3:
      return {{"model", SchemeId::kGrouped3, models::Architecture::kTable2, {}}};
    case Experiment::kGroupedPair18:
      return {{"model", SchemeId::kGroupedPair18, models::Architecture::kTable2, {}}};
    case Experiment::kMultilabel16:
      return {{"model", SchemeId::kMultilabel16, models::Architecture::kTable2, {}}};
    case Experiment::kMultitask:
      return {{"model", SchemeId::kMultitask, models::Architecture::kTable2, {}}};
  }
  throw ConfigError("unknown experiment");
}

std::vector<ResultRow> result_layout(Experiment e) {
  switch (e) {
    case Experiment::kBenchmarkScene10:
      return {{"benchmark", {}, "scene", 10}, {"extra_layer_cnn", {}, "scene", 10}};
    case Experiment::kCity6:
      return {{"city6", {}, "city", 6}};
    case Experiment::kScenePriors:
      return {{"scene_priors", {}, "city", 6}};
    case Experiment::kPair60:
      return {{"pair60", {}, "both", 60}};
    case Experiment::kGrouped3:
      return {{"grouped3", {}, "scene", 3}};
    case Experiment::kGroupedPair18:
      return {{"grouped_pair18", {}, "both", 18}};
    case Experiment::kMultilabel16:
      return {{"multilabel16", {}, "both", 16}, {"multilabel16", {}, "scene", 10},
              {"multilabel16", {}, "city", 6}};
    case Experiment::kMultitask:
      return {{"multitask", {}, "scene", 10}, {"multitask", {}, "city", 6}};
  }
  throw ConfigError("unknown experiment");
}

// ------------------------------------------------------------------ synth

fs::path cmd_synth(const SynthOptions& options) {
  const auto data = dataset::synthesize_dataset(options.config);
  make_dirs(options.out_dir / "audio");
  std::string manifest = "filename\tscene_label\n";
  for (std::size_t i = 0; i < data.clips.size(); ++i) {
    const auto& meta = data.metas[i];
    const std::string rel = "audio/" + meta.id + ".wav";
    dataset::write_wav(options.out_dir / rel, data.clips[i].samples, 1, data.clips[i].sample_rate, 16);
    manifest += rel + "\t" + std::string(to_string(meta.scene)) + "\n";
  }
  const fs::path path = options.out_dir / "meta.csv";
  write_text(path, manifest);
  return path;
}

// ---------------------------------------------------------------- extract

std::string format_feature_config(const features::FeatureConfig& c) {
  std::ostringstream out;
  out << "n_fft=" << c.stft.n_fft << "\n"
      << "hop=" << c.stft.hop << "\n"
      << "window=" << (c.stft.window == features::WindowKind::kHann ? "hann" : "rectangular") << "\n"
      << "centered=" << (c.stft.centered ? "true" : "false") << "\n"
      << "n_mels=" << c.n_mels << "\n"
      << "f_min=" << exact(c.f_min) << "\n"
      << "f_max=" << (c.f_max ? exact(*c.f_max) : "nyquist") << "\n"
      << "smooth_window=" << c.smooth_window << "\n"
      << "order="
      << (c.order == features::PipelineOrder::kNormalizeThenSmooth ? "normalize_smooth" : "smooth_normalize")
      << "\n";
  return out.str();
}

features::FeatureConfig parse_feature_config(const std::string& text) {
  const auto kv = parse_key_values(text, "feature_config.txt");
  auto get = [&](const char* key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("feature config lacks '") + key + "'");
    return it->second;
  };
  features::FeatureConfig c;
  try {
    c.stft.n_fft = std::stoi(get("n_fft"));
    c.stft.hop = std::stoi(get("hop"));
    c.n_mels = std::stoi(get("n_mels"));
    c.f_min = std::stod(get("f_min"));
    const auto fmax = get("f_max");
    if (fmax != "nyquist") c.f_max = std::stod(fmax);
    c.smooth_window = std::stoi(get("smooth_window"));
  } catch (const std::logic_error&) {
    throw FormatError("feature config holds a malformed number");
  }
  const auto window = get("window");
  if (window == "hann") {
    c.stft.window = features::WindowKind::kHann;
  } else if (window == "rectangular") {
    c.stft.window = features::WindowKind::kRectangular;
  } else {
    throw FormatError("feature config: unknown window '" + window + "'");
  }
  c.stft.centered = get("centered") == "true";
  const auto order = get("order");
  if (order == "normalize_smooth") {
    c.order = features::PipelineOrder::kNormalizeThenSmooth;
  } else if (order == "smooth_normalize") {
    c.order = features::PipelineOrder::kSmoothThenNormalize;
  } else {
    throw FormatError("feature config: unknown order '" + order + "'");
  }
  return c;
}

ExtractSummary cmd_extract(const ExtractOptions& opt) {
  opt.features.stft.validate();
  if (opt.features.smooth_window < 1) throw ConfigError("smoothing window must be at least 1");

  std::array<std::vector<dataset::ClipMeta>, 3> subsets;
  if (!opt.train_list.empty()) {
    if (opt.test_list.empty()) throw ConfigError("official splits need both --train-list and --test-list");
    subsets[0] = dataset::load_manifest(opt.train_list, opt.data_root, true);
    if (!opt.validation_list.empty()) {
      subsets[1] = dataset::load_manifest(opt.validation_list, opt.data_root, true);
    }
    subsets[2] = dataset::load_manifest(opt.test_list, opt.data_root, true);
    std::set<std::string> seen;
    for (const auto& s : subsets) {
      for (const auto& m : s) {
        if (!seen.insert(m.id).second) {
          throw ConsistencyError("clip '" + m.id + "' appears in more than one split list");
        }
      }
    }
  } else {
    const fs::path manifest = opt.manifest.empty() ? opt.data_root / "meta.csv" : opt.manifest;
    const auto clips = dataset::load_manifest(manifest, opt.data_root, true);
    if (clips.empty()) throw EmptyInputError("manifest '" + manifest.string() + "' lists no clips");
    auto split = dataset::stratified_split(clips, opt.fractions, opt.split_seed);
    subsets = {std::move(split.train), std::move(split.validation), std::move(split.test)};
  }
  if (subsets[0].empty()) throw EmptyInputError("the training split is empty");

  make_dirs(opt.out_dir / "clips");
  const std::string config_text = format_feature_config(opt.features);
  const fs::path config_path = opt.out_dir / "feature_config.txt";
  if (!opt.force && fs::exists(config_path) && read_text(config_path) != config_text) {
    throw ConfigError("'" + opt.out_dir.string() +
                      "' holds features extracted with other settings; rerun with --force");
  }

  std::string clips_tsv = "id\tsubset\tpath\n";
  ExtractSummary summary;
  features::LogMelExtractor extractor(opt.features);
  features::NormAccumulator acc;
  for (int s = 0; s < 3; ++s) {
    for (const auto& meta : subsets[static_cast<std::size_t>(s)]) {
      clips_tsv += meta.id + "\t" + subset_name(s) + "\t" + meta.path.generic_string() + "\n";
      const fs::path cache = opt.out_dir / "clips" / (meta.id + ".csfm");
      features::FeatureMatrix raw;
      if (!opt.force && fs::exists(cache)) {
        ++summary.skipped;
        if (s != 0) continue;
        raw = features::cache_read(cache);
      } else {
        try {
          raw = extractor.extract(dataset::decode_wav(meta.path));
        } catch (const DataError& e) {
          throw std::decay_t<decltype(e)>(meta.path.string() + ": " + e.what());
        }
        features::cache_write(raw, cache);
        ++summary.written;
      }
      if (s == 0) acc.add(features::stats_input(raw, opt.features));
    }
  }
  note(opt.quiet, "extract: " + std::to_string(summary.written) + " written, " +
                      std::to_string(summary.skipped) + " already cached");

  const fs::path stats_path = opt.out_dir / "norm_stats.csfm";
  if (opt.force || summary.written > 0 || !fs::exists(stats_path)) {
    features::write_norm_stats(acc.finish(), stats_path);
  }
  const fs::path tsv_path = opt.out_dir / "clips.tsv";
  if (!fs::exists(tsv_path) || read_text(tsv_path) != clips_tsv) write_text(tsv_path, clips_tsv);
  if (!fs::exists(config_path) || read_text(config_path) != config_text) write_text(config_path, config_text);
  return summary;
}

FeatureStore::FeatureStore(fs::path dir) : dir_(std::move(dir)) {
  config_ = parse_feature_config(read_text(dir_ / "feature_config.txt"));
  stats_ = features::read_norm_stats(dir_ / "norm_stats.csfm");
  const std::string tsv = read_text(dir_ / "clips.tsv");
  std::istringstream in(tsv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw FormatError(dir_.string() + "/clips.tsv: malformed line");
    const fs::path path = line.substr(t2 + 1);
    auto meta = dataset::parse_clip_name(path.filename().string());
    meta.path = path;
    std::string subset = line.substr(t1 + 1, t2 - t1 - 1);
    check_subset(subset);
    clips_.emplace_back(std::move(meta), std::move(subset));
  }
}

std::size_t FeatureStore::count(const std::string& subset) const {
  std::size_t n = 0;
  for (const auto& c : clips_) n += c.second == subset ? 1 : 0;
  return n;
}

models::FeatureSet FeatureStore::load(const std::string& subset) const {
  check_subset(subset);
  models::FeatureSet out;
  for (const auto& [meta, s] : clips_) {
    if (s != subset) continue;
    const auto raw = features::cache_read(dir_ / "clips" / (meta.id + ".csfm"));
    if (raw.n_bins() != stats_.n_bins()) {
      throw ConsistencyError("cached features of '" + meta.id + "' do not match the stored statistics");
    }
    out.add(features::finalize(raw, stats_, config_), meta);
  }
  return out;
}

// ------------------------------------------------------------------ train

void cmd_train(const TrainOptions& opt) {
  opt.model.validate();
  if (opt.parallel < 1) throw ConfigError("--parallel must be at least 1");
  if (opt.parallel > 1 && opt.experiment != Experiment::kScenePriors) {
    throw ConfigError("--parallel applies to scene_priors only");
  }
  const FeatureStore store(opt.features_dir);
  const auto slots = experiment_models(opt.experiment);
  const std::string exp = experiment_name(opt.experiment);
  make_dirs(opt.out_dir / exp);

  std::vector<ModelSlot> todo;
  for (const auto& slot : slots) {
    if (opt.force || !fs::exists(slot_checkpoint(opt.out_dir, opt.experiment, slot)) ||
        !fs::exists(slot_log(opt.out_dir, opt.experiment, slot))) {
      todo.push_back(slot);
    }
  }
  if (todo.empty()) {
    note(opt.quiet, "train: " + exp + " is up to date");
    return;
  }
  const auto train_set = store.load("train");
  const auto validation = store.load("validation");

  auto config_for = [&](const ModelSlot& slot) {
    models::ModelConfig cfg = opt.model;
    cfg.scheme = slot.scheme;
    cfg.architecture = slot.architecture;
    const std::string who = exp + "/" + slot.name;
    const bool quiet = opt.quiet;
    cfg.on_epoch = [who, quiet](const models::EpochLog& e) { note(quiet, describe(e, who)); };
    return cfg;
  };
  auto save = [&](const ModelSlot& slot, models::TrainedModel& model) {
    models::save_model(slot_checkpoint(opt.out_dir, opt.experiment, slot), model);
    models::write_training_log(slot_log(opt.out_dir, opt.experiment, slot), model);
  };

  if (opt.experiment == Experiment::kScenePriors) {
    models::ModelConfig cfg = config_for(todo.front());
    cfg.on_epoch = {};
    // Seeds per scene come from the base seed, so every scene model is the
    // same whether one or all are retrained.
    std::vector<std::exception_ptr> errors;
    std::vector<std::optional<models::TrainedModel>> trained(todo.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < todo.size(); i = next++) {
        try {
          const Scene scene = *todo[i].scene;
          const auto subset = train_set.filter_scene(scene);
          if (subset.empty()) {
            throw StratumError("no training clips for scene " + std::string(to_string(scene)));
          }
          models::ModelConfig c = config_for(todo[i]);
          c.seed = models::scene_seed(opt.model.seed, scene);
          trained[i].emplace(models::train(c, subset, validation.filter_scene(scene)));
        } catch (...) {
          std::lock_guard<std::mutex> lock(g_log_mutex);
          errors.push_back(std::current_exception());
        }
      }
    };
    const int threads = std::min<int>(opt.parallel, static_cast<int>(todo.size()));
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < todo.size(); ++i) {
      if (trained[i]) save(todo[i], *trained[i]);
    }
    if (!errors.empty()) std::rethrow_exception(errors.front());
    return;
  }

  for (const auto& slot : todo) {
    try {
      auto model = models::train(config_for(slot), train_set, validation);
      save(slot, model);
    } catch (const models::TrainingAborted& e) {
      save(slot, *e.model());
      throw;
    }
  }
}

// --------------------------------------------------------------- evaluate

std::vector<ResultRow> cmd_evaluate(const EvaluateOptions& opt) {
  check_subset(opt.split);
  if (!(opt.threshold >= 0.0 && opt.threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  const FeatureStore store(opt.features_dir);
  const auto data = store.load(opt.split);
  if (data.empty()) throw EmptyInputError("the " + opt.split + " split is empty");
  const std::string exp = experiment_name(opt.experiment);
  const fs::path report = opt.report_dir.empty() ? opt.models_dir / exp / ("report_" + opt.split)
                                                 : opt.report_dir;
  make_dirs(report);
  const auto slots = experiment_models(opt.experiment);
  auto layout = result_layout(opt.experiment);

  if (opt.experiment == Experiment::kScenePriors) {
    // Per-scene city recall (rows scenes, columns cities).
    std::string table = "scene";
    for (City c : kAllCities) table += "," + std::string(to_string(c));
    table += ",average\n";
    double sum = 0.0;
    std::size_t defined = 0, correct = 0, total = 0;
    for (const auto& slot : slots) {
      auto model = load_slot(slot_checkpoint(opt.models_dir, opt.experiment, slot), slot);
      const auto subset = data.filter_scene(*slot.scene);
      table += slot.name;
      if (subset.empty()) {
        for (std::size_t c = 0; c <= kNumCities; ++c) table += ",undefined";
        table += "\n";
        continue;
      }
      report_model(model, subset, report / slot.name, opt);
      const auto preds = models::predict(model, subset);
      const auto truth = models::truth_indices(*model.scheme, subset);
      const auto cm = eval::confusion(preds[0], truth[0]);
      const auto pc = eval::per_class_accuracy(cm);
      for (const auto& r : pc.recall) {
        table += "," + (r ? exact(*r) : std::string("undefined"));
        if (r) {
          sum += *r;
          ++defined;
        }
      }
      table += "," + (pc.macro ? exact(*pc.macro) : std::string("undefined")) + "\n";
      correct += cm.trace();
      total += cm.total();
    }
    if (defined == 0) throw EmptyInputError("no scene has evaluation clips");
    write_text(report / "scene_city_accuracy.csv", table);
    const double mean = sum / static_cast<double>(defined);
    write_summary(report / "summary.csv",
                  {{"accuracy", mean}, {"pooled_accuracy", static_cast<double>(correct) / static_cast<double>(total)}});
    layout[0].accuracy = mean;
  } else {
    std::size_t row = 0;
    for (const auto& slot : slots) {
      auto model = load_slot(slot_checkpoint(opt.models_dir, opt.experiment, slot), slot);
      const fs::path dir = slots.size() > 1 ? report / slot.name : report;
      const auto rep = report_model(model, data, dir, opt);
      for (const auto& r : rep.rows) layout.at(row++).accuracy = r.accuracy;
    }
  }

  if (opt.distances) {
    const auto train_set = store.load("train");
    std::vector<City> cities;
    for (const auto& m : train_set.metas) cities.push_back(m.city);
    eval::write_distance_csv(report / "city_distances.csv",
                             eval::city_feature_distances(train_set.matrices, cities));
  }
  for (const auto& r : layout) {
    note(opt.quiet, "evaluate: " + r.task + " " + r.target + " accuracy " + fixed(*r.accuracy));
  }
  return layout;
}

// ---------------------------------------------------------- reproduce-all

void write_results_csv(const fs::path& path, const std::vector<ResultRow>& rows) {
  std::string text = "task,accuracy,target,n_classes\n";
  for (const auto& r : rows) {
    text += r.task + "," + (r.accuracy ? exact(*r.accuracy) : std::string("failed")) + "," + r.target +
            "," + std::to_string(r.n_classes) + "\n";
  }
  write_text(path, text);
}

bool cmd_reproduce_all(const ReproduceOptions& opt) {
  if (opt.dataset.empty()) throw ConfigError("no dataset given (use --data or CITYSOUND_DATA)");
  make_dirs(opt.out_dir);
  ExtractOptions ex = opt.extract;
  ex.out_dir = opt.out_dir / "features";
  ex.quiet = opt.quiet;
  if (opt.dataset == "synthetic") {
    SynthOptions so{opt.out_dir / "synthetic", opt.synth};
    so.config.seed = opt.synth.seed;
    ex.manifest = cmd_synth(so);
    ex.data_root = so.out_dir;
  } else {
    ex.data_root = opt.dataset;
    if (!opt.manifest.empty()) ex.manifest = opt.manifest;
  }
  cmd_extract(ex);

  const fs::path models_dir = opt.out_dir / "models";
  std::vector<ResultRow> rows;
  bool ok = true;
  const auto experiments =
      opt.experiments.empty() ? std::vector<Experiment>(std::begin(kAllExperiments), std::end(kAllExperiments))
                              : opt.experiments;
  for (Experiment e : experiments) {
    auto layout = result_layout(e);
    try {
      TrainOptions t;
      t.features_dir = ex.out_dir;
      t.out_dir = models_dir;
      t.experiment = e;
      t.model = opt.model;
      t.model.seed = opt.seed;
      t.parallel = e == Experiment::kScenePriors ? opt.parallel : 1;
      t.quiet = opt.quiet;
      cmd_train(t);
      EvaluateOptions v;
      v.features_dir = ex.out_dir;
      v.models_dir = models_dir;
      v.experiment = e;
      v.quiet = opt.quiet;
      v.distances = e == Experiment::kCity6;
      layout = cmd_evaluate(v);
    } catch (const Error& err) {
      ok = false;
      std::lock_guard<std::mutex> lock(g_log_mutex);
      std::cerr << "reproduce-all: " << experiment_name(e) << " failed: " << err.what() << '\n';
    }
    for (auto& r : layout) rows.push_back(std::move(r));
    write_results_csv(opt.out_dir / "results.csv", rows);
  }
  return ok;
}

}  // namespace citysound::cli
