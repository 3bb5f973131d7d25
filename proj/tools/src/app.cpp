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

// Command-line parsing for the citysound tool.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "citysound/cli/commands.hpp"
#include "citysound/errors.hpp"

namespace citysound::cli {
namespace {

struct FeatureFlags {
  double f_max = 0.0;  // <= 0: Nyquist
  std::string order = "normalize_smooth";
  std::string window = "hann";

  void apply(features::FeatureConfig& c) const {
    if (f_max > 0.0) c.f_max = f_max;
    c.order = order == "smooth_normalize" ? features::PipelineOrder::kSmoothThenNormalize
                                          : features::PipelineOrder::kNormalizeThenSmooth;
    c.stft.window = window == "rectangular" ? features::WindowKind::kRectangular
                                            : features::WindowKind::kHann;
  }
};

void add_feature_options(CLI::App* sub, ExtractOptions& ex, FeatureFlags& flags) {
  auto& f = ex.features;
  sub->add_option("--n-fft", f.stft.n_fft, "FFT size")->capture_default_str();
  sub->add_option("--hop", f.stft.hop, "STFT hop in samples")->capture_default_str();
  sub->add_option("--window", flags.window, "analysis window")
      ->check(CLI::IsMember({"hann", "rectangular"}))
      ->capture_default_str();
  sub->add_option("--n-mels", f.n_mels, "mel bands")->capture_default_str();
  sub->add_option("--f-min", f.f_min, "lowest mel frequency (Hz)")->capture_default_str();
  sub->add_option("--f-max", flags.f_max, "highest mel frequency (Hz); default Nyquist");
  sub->add_option("--smooth-window", f.smooth_window, "moving-average window in frames")
      ->capture_default_str();
  sub->add_option("--order", flags.order, "stage order")
      ->check(CLI::IsMember({"normalize_smooth", "smooth_normalize"}))
      ->capture_default_str();

  sub->add_option("--split-seed", ex.split_seed, "seed of the stratified split")->capture_default_str();
  sub->add_option("--train-fraction", ex.fractions.train)->capture_default_str();
  sub->add_option("--validation-fraction", ex.fractions.validation)->capture_default_str();
  sub->add_option("--test-fraction", ex.fractions.test)->capture_default_str();
  sub->add_option("--train-list", ex.train_list, "official training list (relative to --data)");
  sub->add_option("--validation-list", ex.validation_list, "official validation list");
  sub->add_option("--test-list", ex.test_list, "official test list");
}

void add_model_options(CLI::App* sub, models::ModelConfig& m, std::string& branch) {
  sub->add_option("--epochs", m.epochs)->capture_default_str();
  sub->add_option("--batch-size", m.batch_size)->capture_default_str();
  sub->add_option("--seed", m.seed, "training seed")->capture_default_str();
  sub->add_option("--lr", m.adam.lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--beta1", m.adam.beta1)->capture_default_str();
  sub->add_option("--beta2", m.adam.beta2)->capture_default_str();
  sub->add_option("--adam-epsilon", m.adam.epsilon)->capture_default_str();
  sub->add_option("--decay", m.adam.decay, "learning-rate decay per step")->capture_default_str();
  sub->add_flag("--amsgrad", m.adam.amsgrad);
  sub->add_option("--scene-weight", m.scene_weight, "multitask scene loss weight")->capture_default_str();
  sub->add_option("--city-weight", m.city_weight, "multitask city loss weight")->capture_default_str();
  sub->add_option("--branch", branch, "where multitask heads branch")
      ->check(CLI::IsMember({"after_dense", "after_flatten"}))
      ->capture_default_str();
  sub->add_option("--time-downsample", m.time_downsample, "average-pool factor over frames")
      ->capture_default_str();
}

void add_synth_options(CLI::App* sub, dataset::SynthConfig& s, const std::string& seed_flag) {
  sub->add_option("--clips-per-pair", s.n_clips_per_city_scene)->capture_default_str();
  sub->add_option("--duration", s.duration_s, "clip length in seconds")->capture_default_str();
  sub->add_option("--sample-rate", s.sample_rate)->capture_default_str();
  sub->add_option("--noise", s.noise_level, "white-noise amplitude")->capture_default_str();
  sub->add_option(seed_flag, s.seed, "generator seed")->capture_default_str();
}

models::BranchPoint parse_branch(const std::string& b) {
  return b == "after_flatten" ? models::BranchPoint::kAfterFlatten : models::BranchPoint::kAfterDense;
}

// Expands `--config FILE` (key=value lines) into flags placed before the
// user's own, so explicit flags win.
std::vector<std::string> expand_config(CLI::App& app, const std::vector<std::string>& args) {
  std::size_t sub_at = args.size();
  CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!args[i].empty() && args[i][0] != '-') {
      sub = app.get_subcommand_no_throw(args[i]);
      if (sub) sub_at = i;
      break;
    }
  }
  if (!sub) return args;
  std::string config;
  for (std::size_t i = sub_at + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (config.empty()) return args;

  std::ifstream in(config);
  if (!in) throw MissingFileError("cannot open config file '" + config + "'");
  std::vector<std::string> injected;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(config + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto x = s.find_first_not_of(" \t");
      const auto y = s.find_last_not_of(" \t");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt || key == "config") {
      throw ConfigError(config + ":" + std::to_string(line_no) + ": unknown key '" + key + "' for " +
                        sub->get_name());
    }
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1" || value == "yes") injected.push_back("--" + key);
      continue;
    }
    injected.push_back("--" + key);
    injected.push_back(value);
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_at + 1));
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_at + 1), args.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"City classification from urban soundscapes.", "citysound"};
  app.require_subcommand(1);
  std::string config_unused;

  auto prepare = [&](CLI::App* sub) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--config", config_unused, "key=value file of defaults for this command");
    return sub;
  };

  // synth
  SynthOptions synth_opt;
  bool synth_quiet = false;
  auto* synth = prepare(app.add_subcommand("synth", "Generate a labelled synthetic corpus"));
  synth->add_option("--out", synth_opt.out_dir, "output directory")->required();
  synth->add_flag("--quiet", synth_quiet, "do not print the manifest path");
  add_synth_options(synth, synth_opt.config, "--seed");

  // extract
  ExtractOptions ex_opt;
  FeatureFlags ex_flags;
  std::string ex_data;
  auto* extract = prepare(app.add_subcommand("extract", "Extract log-mel features and fit statistics"));
  extract->add_option("--data", ex_data, "dataset root")->envname("CITYSOUND_DATA")->required();
  extract->add_option("--manifest", ex_opt.manifest, "manifest (default <data>/meta.csv)");
  extract->add_option("--out", ex_opt.out_dir, "feature directory")->required();
  extract->add_flag("--force", ex_opt.force, "recompute existing outputs");
  extract->add_flag("--quiet", ex_opt.quiet);
  add_feature_options(extract, ex_opt, ex_flags);

  // train
  TrainOptions tr_opt;
  std::string tr_experiment, tr_branch = "after_dense";
  std::vector<std::string> names;
  for (Experiment e : kAllExperiments) names.push_back(experiment_name(e));
  auto* train = prepare(app.add_subcommand("train", "Train the model(s) of one experiment"));
  train->add_option("--features", tr_opt.features_dir, "feature directory")->required();
  train->add_option("--out", tr_opt.out_dir, "model directory")->required();
  train->add_option("--experiment", tr_experiment)->check(CLI::IsMember(names))->required();
  train->add_option("--parallel", tr_opt.parallel, "threads for scene_priors")->capture_default_str();
  train->add_flag("--force", tr_opt.force, "retrain existing models");
  train->add_flag("--quiet", tr_opt.quiet);
  add_model_options(train, tr_opt.model, tr_branch);

  // evaluate
  EvaluateOptions ev_opt;
  std::string ev_experiment;
  auto* evaluate = prepare(app.add_subcommand("evaluate", "Evaluate trained models and write reports"));
  evaluate->add_option("--features", ev_opt.features_dir, "feature directory")->required();
  evaluate->add_option("--models", ev_opt.models_dir, "model directory (train --out)")->required();
  evaluate->add_option("--experiment", ev_experiment)->check(CLI::IsMember(names))->required();
  evaluate->add_option("--split", ev_opt.split)
      ->check(CLI::IsMember({"train", "validation", "test"}))
      ->capture_default_str();
  evaluate->add_option("--report", ev_opt.report_dir, "report directory");
  evaluate->add_option("--threshold", ev_opt.threshold, "multi-label binarisation threshold")
      ->capture_default_str();
  evaluate->add_option("--confusion-threshold", ev_opt.confusion_threshold,
                       "count above which a confusion is listed")
      ->capture_default_str();
  evaluate->add_flag("--distances", ev_opt.distances, "write the city feature-distance table");
  evaluate->add_flag("--quiet", ev_opt.quiet);

  // reproduce-all
  ReproduceOptions rp_opt;
  FeatureFlags rp_flags;
  std::string rp_branch = "after_dense";
  std::vector<std::string> rp_experiments;
  auto* reproduce = prepare(app.add_subcommand("reproduce-all", "Run the full experiment matrix"));
  reproduce->add_option("--data", rp_opt.dataset, "dataset root, or 'synthetic'")
      ->envname("CITYSOUND_DATA")
      ->required();
  reproduce->add_option("--manifest", rp_opt.manifest, "manifest (default <data>/meta.csv)");
  reproduce->add_option("--out", rp_opt.out_dir, "output directory")->required();
  reproduce->add_option("--experiments", rp_experiments, "subset of experiments to run")
      ->check(CLI::IsMember(names))
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  reproduce->add_option("--parallel", rp_opt.parallel, "threads for scene_priors")->capture_default_str();
  reproduce->add_flag("--quiet", rp_opt.quiet);
  add_synth_options(reproduce, rp_opt.synth, "--synth-seed");
  add_feature_options(reproduce, rp_opt.extract, rp_flags);
  add_model_options(reproduce, rp_opt.model, rp_branch);

  try {
    std::vector<std::string> expanded = expand_config(app, args);
    std::reverse(expanded.begin(), expanded.end());
    try {
      app.parse(expanded);
    } catch (const CLI::ParseError& e) {
      return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    if (*synth) {
      const auto manifest = cmd_synth(synth_opt);
      if (!synth_quiet) std::cout << manifest.string() << '\n';
    } else if (*extract) {
      ex_opt.data_root = ex_data;
      ex_flags.apply(ex_opt.features);
      cmd_extract(ex_opt);
    } else if (*train) {
      tr_opt.experiment = parse_experiment(tr_experiment);
      tr_opt.model.branch = parse_branch(tr_branch);
      cmd_train(tr_opt);
    } else if (*evaluate) {
      ev_opt.experiment = parse_experiment(ev_experiment);
      const auto rows = cmd_evaluate(ev_opt);
      for (const auto& r : rows) {
        std::cout << r.task << ',' << *r.accuracy << ',' << r.target << ',' << r.n_classes << '\n';
      }
    } else if (*reproduce) {
      rp_flags.apply(rp_opt.extract.features);
      rp_opt.model.branch = parse_branch(rp_branch);
      rp_opt.seed = rp_opt.model.seed;
      if (rp_opt.parallel < 1) throw ConfigError("--parallel must be at least 1");
      for (const auto& n : rp_experiments) rp_opt.experiments.push_back(parse_experiment(n));
      if (!cmd_reproduce_all(rp_opt)) return kExitData;
    }
    return kExitOk;
  } catch (const NumericError& e) {
    std::cerr << "citysound: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "citysound: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ContractError& e) {
    std::cerr << "citysound: usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "citysound: I/O error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "citysound: error: " << e.what() << '\n';
    return kExitData;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace citysound::cli
