/*
 * Copyright 2026 The EPPNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cli.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "eppnet/checkpoint.h"
#include "eppnet/dataset.h"
#include "eppnet/error.h"
#include "eppnet/evaluation.h"
#include "eppnet/gradient_suite.h"
#include "eppnet/reports.h"
#include "eppnet/train_config.h"
#include "eppnet/training.h"

namespace eppnet::cli {
namespace {

namespace fs = std::filesystem;
using KeyValues = std::map<std::string, std::string>;

const std::vector<std::string>& SynthKeys() {
  static const std::vector<std::string> keys = {
      "train_per_class", "test_per_class", "part_size",
      "background",      "noise_amplitude", "data_seed"};
  return keys;
}

const std::vector<std::string>& PathKeys() {
  static const std::vector<std::string> keys = {"data", "model", "log", "out"};
  return keys;
}

bool IsRunConfigKey(const std::string& key) {
  return IsTrainConfigKey(key) ||
         std::find(SynthKeys().begin(), SynthKeys().end(), key) !=
             SynthKeys().end() ||
         std::find(PathKeys().begin(), PathKeys().end(), key) != PathKeys().end();
}

std::string Dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string OneLine(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

fs::path DefaultOutputDir() {
  const char* env = std::getenv("EPPNET_OUTPUT_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path(".");
}

// Config-file values overlaid by explicitly given flags.
class Settings {
 public:
  // Registers `--<key>` (underscores as dashes) plus any extra names.
  void Bind(CLI::App* app, const std::string& key, const std::string& help,
            const std::string& extra_names = "") {
    std::string names = "--" + Dashed(key);
    if (!extra_names.empty()) names = extra_names + "," + names;
    bound_.push_back({key, app->add_option(names, flags_[key], help)});
  }

  void BindTrainConfig(CLI::App* app) {
    for (const auto& [key, value] : TrainConfig().ToKeyValues()) {
      Bind(app, key, "training config (default " + value + ")");
    }
  }

  void Resolve(const std::string& config_path) {
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) {
        throw Error(ErrorCode::kIo, "cannot read config file " + config_path);
      }
      std::stringstream buffer;
      buffer << in.rdbuf();
      for (const auto& [key, value] : ParseKeyValues(buffer.str())) {
        if (!IsRunConfigKey(key)) {
          throw Error(ErrorCode::kInvalidArgument,
                      "unknown config key '" + key + "' in " + config_path);
        }
        values_[key] = value;
      }
    }
    for (const auto& [key, option] : bound_) {
      if (option->count() > 0) values_[key] = flags_[key];
    }
  }

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  std::string Get(const std::string& key, const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  std::string Require(const std::string& key) const {
    if (!Has(key)) {
      throw Error(ErrorCode::kInvalidArgument, "--" + Dashed(key) + " is required");
    }
    return Get(key);
  }

  KeyValues Subset(bool (*pred)(const std::string&)) const {
    KeyValues out;
    for (const auto& [key, value] : values_) {
      if (pred(key)) out[key] = value;
    }
    return out;
  }

 private:
  std::map<std::string, std::string> flags_;
  std::vector<std::pair<std::string, CLI::Option*>> bound_;
  KeyValues values_;
};

bool TrainKey(const std::string& key) { return IsTrainConfigKey(key); }

TrainConfig ResolveTrainConfig(const Settings& settings, const Dataset& data) {
  TrainConfig config;
  KeyValues kv = settings.Subset(&TrainKey);
  if (kv.count("classes") == 0) kv["classes"] = std::to_string(data.num_classes);
  config.ApplyKeyValues(kv);
  return config;
}

fs::path OutputPath(const Settings& settings, const std::string& name) {
  if (settings.Has("out")) return fs::path(settings.Get("out"));
  return DefaultOutputDir() / name;
}

void EnsureParent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

fs::path Sibling(const fs::path& primary, const std::string& name) {
  return primary.parent_path() / name;
}

void WriteResolved(const fs::path& primary, const std::string& command,
                   KeyValues values) {
  values["out"] = primary.string();
  WriteTextFile(Sibling(primary, command + ".config").string(),
                "# resolved configuration for `eppnet " + command + "`\n" +
                    FormatKeyValues(values));
}

const Split& SelectSplit(const Dataset& data, const std::string& name) {
  if (name == "test") return data.test;
  if (name == "train") return data.train;
  throw Error(ErrorCode::kInvalidArgument,
              "split must be 'train' or 'test', got '" + name + "'");
}

SynthSpec ResolveSynthSpec(const Settings& s) {
  SynthSpec spec;
  auto u = [&](const std::string& key, std::size_t& field) {
    if (s.Has(key)) field = ParseUnsigned(key, s.Get(key));
  };
  auto d = [&](const std::string& key, double& field) {
    if (s.Has(key)) field = ParseDouble(key, s.Get(key));
  };
  u("classes", spec.num_classes);
  u("train_per_class", spec.train_per_class);
  u("test_per_class", spec.test_per_class);
  u("input_height", spec.height);
  u("input_width", spec.width);
  u("input_channels", spec.channels);
  u("part_size", spec.part_size);
  d("background", spec.background);
  d("noise_amplitude", spec.noise_amplitude);
  if (s.Has("data_seed")) spec.seed = ParseUnsigned("data_seed", s.Get("data_seed"));
  spec.Validate();
  return spec;
}

KeyValues SynthKeyValues(const SynthSpec& spec) {
  return {{"classes", std::to_string(spec.num_classes)},
          {"train_per_class", std::to_string(spec.train_per_class)},
          {"test_per_class", std::to_string(spec.test_per_class)},
          {"input_height", std::to_string(spec.height)},
          {"input_width", std::to_string(spec.width)},
          {"input_channels", std::to_string(spec.channels)},
          {"part_size", std::to_string(spec.part_size)},
          {"background", FormatDouble(spec.background)},
          {"noise_amplitude", FormatDouble(spec.noise_amplitude)},
          {"data_seed", std::to_string(spec.seed)}};
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Prototype-part image classifier: data generation, training "
               "and evaluation.",
               "eppnet"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  std::string config_path;
  app.add_option("--config", config_path,
                 "key=value file; command-line flags override its values");

  Settings s;

  CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic dataset file");
  s.Bind(gen, "classes", "number of classes");
  s.Bind(gen, "train_per_class", "training images per class");
  s.Bind(gen, "test_per_class", "test images per class");
  s.Bind(gen, "input_height", "image height");
  s.Bind(gen, "input_width", "image width");
  s.Bind(gen, "input_channels", "image channels");
  s.Bind(gen, "part_size", "side of each square part motif");
  s.Bind(gen, "background", "constant background value");
  s.Bind(gen, "noise_amplitude", "uniform background noise amplitude", "--noise");
  s.Bind(gen, "data_seed", "generator seed", "--seed");
  s.Bind(gen, "out", "dataset path (default data.eppd)");
  std::string ppm_dir;
  gen->add_option("--ppm-dir", ppm_dir, "also export every image as a pixmap");

  CLI::App* train = app.add_subcommand("train", "Train a model; write checkpoint and log");
  s.BindTrainConfig(train);
  s.Bind(train, "data", "dataset path");
  s.Bind(train, "out", "checkpoint path (default model.eppn)");
  s.Bind(train, "log", "train log CSV (default train_log.csv next to --out)");
  std::string checkpoint_dir;
  train->add_option("--checkpoint-dir", checkpoint_dir,
                    "write cycle_<n>.eppn after every cycle");

  CLI::App* eval = app.add_subcommand("eval", "Write the accuracy table");
  s.Bind(eval, "model", "checkpoint path");
  s.Bind(eval, "data", "dataset path");
  s.Bind(eval, "out", "CSV path (default accuracy.csv)");
  std::string split_name = "test";
  eval->add_option("--split", split_name, "train or test")->capture_default_str();

  CLI::App* faith = app.add_subcommand("faithfulness", "Write per-class faithfulness scores");
  s.Bind(faith, "model", "checkpoint path");
  s.Bind(faith, "data", "dataset path");
  s.Bind(faith, "out", "CSV path (default faithfulness.csv)");
  std::optional<std::size_t> faith_class;
  faith->add_option("--class", faith_class, "only this class");

  CLI::App* prune = app.add_subcommand("prune-eval", "Prune copies of a model and re-evaluate");
  s.Bind(prune, "model", "checkpoint path");
  s.Bind(prune, "data", "dataset path");
  s.Bind(prune, "out", "CSV path (default pruning.csv)");
  double fraction = 0.5;
  std::vector<std::uint64_t> prune_seeds = {0, 1, 2, 3, 4};
  prune->add_option("--fraction", fraction, "fraction of each class removed")
      ->capture_default_str();
  prune->add_option("--seeds", prune_seeds, "comma-separated prune seeds")
      ->delimiter(',')
      ->capture_default_str();
  std::string prune_split = "test";
  prune->add_option("--split", prune_split, "train or test")->capture_default_str();

  CLI::App* ablate = app.add_subcommand("ablate-theta", "Train once per theta; write accuracies");
  s.BindTrainConfig(ablate);
  s.Bind(ablate, "data", "dataset path");
  s.Bind(ablate, "out", "CSV path (default ablation.csv)");
  std::vector<std::size_t> thetas = {1, 3, 5, 10};
  ablate->add_option("--thetas", thetas, "comma-separated theta values")
      ->delimiter(',')
      ->capture_default_str();
  std::string ablate_model_dir;
  ablate->add_option("--model-dir", ablate_model_dir,
                     "also save theta_<t>.eppn checkpoints here");

  CLI::App* curves = app.add_subcommand("curves", "Per-epoch mu/nu samples and roughness");
  s.Bind(curves, "log", "train log CSV");
  s.Bind(curves, "out", "CSV path (default curves.csv)");

  CLI::App* explain = app.add_subcommand("explain", "Activation maps for one image");
  s.Bind(explain, "model", "checkpoint path");
  s.Bind(explain, "data", "dataset path");
  s.Bind(explain, "out", "directory for maps and sidecars (default output dir)");
  std::size_t image_index = 0;
  std::size_t top = 3;
  std::string explain_split = "test";
  explain->add_option("--image", image_index, "image index within the split")
      ->capture_default_str();
  explain->add_option("--top", top, "number of prototypes, by contribution")
      ->capture_default_str();
  explain->add_option("--split", explain_split, "train or test")->capture_default_str();

  CLI::App* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  GradientSuiteOptions grad_options;
  grad->add_option("--points", grad_options.points, "random points per check")
      ->capture_default_str();
  grad->add_option("--seed", grad_options.seed, "point sampling seed")
      ->capture_default_str();
  grad->add_option("--tolerance", grad_options.tolerance, "max relative error")
      ->capture_default_str();
  s.Bind(grad, "out", "optional CSV of results");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: invalid_argument: " << OneLine(e.what()) << "\n";
    return kValidationError;
  }

  try {
    s.Resolve(config_path);

    if (*gen) {
      const SynthSpec spec = ResolveSynthSpec(s);
      const fs::path path = OutputPath(s, "data.eppd");
      EnsureParent(path);
      const Dataset data = Generate(spec);
      SaveDataset(path.string(), data);
      if (!ppm_dir.empty()) {
        fs::create_directories(ppm_dir);
        for (const auto& [name, split] :
             {std::pair<std::string, const Split*>{"train", &data.train},
              {"test", &data.test}}) {
          for (std::size_t i = 0; i < split->size(); ++i) {
            WritePpm((fs::path(ppm_dir) / (name + "_" + std::to_string(i) + ".ppm"))
                         .string(),
                     split->images[i]);
          }
        }
      }
      WriteResolved(path, "gen-data", SynthKeyValues(spec));
      out << "wrote " << path.string() << " (" << data.train.size() << " train, "
          << data.test.size() << " test)\n";
      return kOk;
    }

    if (*train) {
      const std::string data_path = s.Require("data");
      const Dataset data = LoadDataset(data_path);
      const TrainConfig config = ResolveTrainConfig(s, data);
      const fs::path model_path = OutputPath(s, "model.eppn");
      EnsureParent(model_path);
      const fs::path log_path = s.Has("log") ? fs::path(s.Get("log"))
                                             : Sibling(model_path, "train_log.csv");
      EnsureParent(log_path);
      TrainOptions options;
      options.log_path = log_path.string();
      if (!checkpoint_dir.empty()) {
        fs::create_directories(checkpoint_dir);
        options.checkpoint_dir = checkpoint_dir;
      }
      const TrainResult result = Train(config, data, options);
      SaveCheckpoint(model_path.string(), result.params, result.config);
      WriteTextFile(Sibling(log_path, "projections.csv").string(),
                    ProjectionCsv(result.log));
      KeyValues resolved = result.config.ToKeyValues();
      resolved["data"] = data_path;
      resolved["log"] = log_path.string();
      WriteResolved(model_path, "train", resolved);
      const EpochRecord& last = result.log.epochs.back();
      out << "trained " << result.log.epochs.size() << " epochs; train accuracy "
          << FormatDouble(last.train_accuracy) << ", test accuracy "
          << FormatDouble(last.test_accuracy) << "\n";
      return kOk;
    }

    if (*eval) {
      const Checkpoint model = LoadCheckpoint(s.Require("model"));
      const Dataset data = LoadDataset(s.Require("data"));
      const AccuracyReport report =
          Accuracy(model.params, SelectSplit(data, split_name));
      const fs::path path = OutputPath(s, "accuracy.csv");
      EnsureParent(path);
      WriteTextFile(path.string(), AccuracyCsv(report, data.class_names));
      WriteResolved(path, "eval",
                    {{"model", s.Get("model")}, {"data", s.Get("data")},
                     {"split", split_name}});
      out << split_name << " accuracy " << FormatDouble(report.overall) << "\n";
      return kOk;
    }

    if (*faith) {
      const Checkpoint model = LoadCheckpoint(s.Require("model"));
      const Dataset data = LoadDataset(s.Require("data"));
      std::vector<ClassFaithfulness> classes;
      if (faith_class) {
        classes.push_back(Faithfulness(model.params, data.test, *faith_class));
      } else {
        classes = FaithfulnessAllClasses(model.params, data.test);
      }
      const fs::path path = OutputPath(s, "faithfulness.csv");
      EnsureParent(path);
      WriteTextFile(path.string(), FaithfulnessCsv(classes));
      WriteTextFile(Sibling(path, "faithfulness_detail.csv").string(),
                    FaithfulnessDetailCsv(classes));
      KeyValues resolved = {{"model", s.Get("model")}, {"data", s.Get("data")}};
      if (faith_class) resolved["class"] = std::to_string(*faith_class);
      WriteResolved(path, "faithfulness", resolved);
      for (const ClassFaithfulness& c : classes) {
        out << "class " << c.class_index << ": t=" << FormatDouble(c.score)
            << " over " << c.count << " images\n";
      }
      return kOk;
    }

    if (*prune) {
      const Checkpoint model = LoadCheckpoint(s.Require("model"));
      const Dataset data = LoadDataset(s.Require("data"));
      const std::vector<PruneRow> rows = PruneExperiment(
          model.params, SelectSplit(data, prune_split), fraction, prune_seeds);
      const fs::path path = OutputPath(s, "pruning.csv");
      EnsureParent(path);
      WriteTextFile(path.string(), PruneCsv(rows));
      std::string seeds_text;
      for (std::size_t i = 0; i < prune_seeds.size(); ++i) {
        seeds_text += (i ? "," : "") + std::to_string(prune_seeds[i]);
      }
      WriteResolved(path, "prune-eval",
                    {{"model", s.Get("model")}, {"data", s.Get("data")},
                     {"fraction", FormatDouble(fraction)},
                     {"seeds", seeds_text}, {"split", prune_split}});
      std::vector<double> deltas;
      for (const PruneRow& r : rows) deltas.push_back(r.delta);
      out << "median accuracy drop " << FormatDouble(Median(deltas)) << "\n";
      return kOk;
    }

    if (*ablate) {
      const std::string data_path = s.Require("data");
      const Dataset data = LoadDataset(data_path);
      const TrainConfig base = ResolveTrainConfig(s, data);
      if (!ablate_model_dir.empty()) fs::create_directories(ablate_model_dir);
      const std::vector<AblationRow> rows = ThetaAblation(
          base, thetas, data, [&](std::size_t theta, const TrainResult& result) {
            out << "theta " << theta << ": test accuracy "
                << FormatDouble(result.log.epochs.back().test_accuracy) << "\n";
            if (!ablate_model_dir.empty()) {
              SaveCheckpoint((fs::path(ablate_model_dir) /
                              ("theta_" + std::to_string(theta) + ".eppn"))
                                 .string(),
                             result.params, result.config);
            }
          });
      const fs::path path = OutputPath(s, "ablation.csv");
      EnsureParent(path);
      WriteTextFile(path.string(), AblationCsv(rows));
      KeyValues resolved = base.ToKeyValues();
      resolved.erase("theta");
      std::string thetas_text;
      for (std::size_t i = 0; i < thetas.size(); ++i) {
        thetas_text += (i ? "," : "") + std::to_string(thetas[i]);
      }
      resolved["thetas"] = thetas_text;
      resolved["data"] = data_path;
      WriteResolved(path, "ablate-theta", resolved);
      return kOk;
    }

    if (*curves) {
      const TrainLog log = ReadTrainLogCsv(s.Require("log"));
      const CurveSamples samples = MuNuCurves(log);
      const fs::path path = OutputPath(s, "curves.csv");
      EnsureParent(path);
      WriteTextFile(path.string(), CurvesCsv(samples));
      WriteTextFile(Sibling(path, "roughness.csv").string(), RoughnessCsv(samples));
      WriteResolved(path, "curves", {{"log", s.Get("log")}});
      out << "roughness mu " << FormatDouble(samples.mu_roughness) << ", nu "
          << FormatDouble(samples.nu_roughness) << "\n";
      return kOk;
    }

    if (*explain) {
      const Checkpoint model = LoadCheckpoint(s.Require("model"));
      const Dataset data = LoadDataset(s.Require("data"));
      const Split& split = SelectSplit(data, explain_split);
      if (image_index >= split.size()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "image " + std::to_string(image_index) + " out of range for " +
                        std::to_string(split.size()) + " " + explain_split +
                        " images");
      }
      const fs::path dir = s.Has("out") ? fs::path(s.Get("out")) : DefaultOutputDir();
      fs::create_directories(dir);
      const Tensor& image = split.images[image_index];
      const Prediction prediction = Forward(image, model.params);
      const std::size_t k = prediction.explanation.predicted_class;
      std::vector<std::size_t> order;
      for (std::size_t j = 0; j < model.params.num_prototypes(); ++j) {
        if (!model.params.prune_mask[j]) order.push_back(j);
      }
      auto contribution = [&](std::size_t j) {
        return prediction.explanation.prototypes[j].score *
               model.params.fc_weights.at({j, k});
      };
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return contribution(a) > contribution(b);
      });
      order.resize(std::min(top, order.size()));
      const std::string stem = explain_split + "_" + std::to_string(image_index);
      WritePpm((dir / (stem + ".ppm")).string(), image);
      for (std::size_t j : order) {
        const ActivationMap map = ComputeActivationMap(model.params, image, j, k);
        const std::string base = stem + "_proto" + std::to_string(j);
        ExportActivationMap(map, (dir / (base + ".pgm")).string(),
                            (dir / (base + ".json")).string());
        out << "prototype " << j << ": similarity " << FormatDouble(map.sidecar.score)
            << ", contribution " << FormatDouble(map.sidecar.contribution) << "\n";
      }
      WriteResolved(dir / (stem + ".ppm"), "explain",
                    {{"model", s.Get("model")}, {"data", s.Get("data")},
                     {"split", explain_split},
                     {"image", std::to_string(image_index)},
                     {"top", std::to_string(top)},
                     {"label", std::to_string(split.labels[image_index])},
                     {"predicted", std::to_string(k)}});
      return kOk;
    }

    if (*grad) {
      const std::vector<GradientCheckResult> results = RunGradientSuite(grad_options);
      bool all_passed = true;
      std::ostringstream csv;
      csv << "check,max_relative_error,passed\n";
      for (const GradientCheckResult& r : results) {
        all_passed = all_passed && r.passed;
        out << (r.passed ? "PASS " : "FAIL ") << r.name << " "
            << FormatDouble(r.max_error) << "\n";
        csv << r.name << ',' << FormatDouble(r.max_error) << ','
            << (r.passed ? 1 : 0) << "\n";
      }
      if (s.Has("out")) {
        const fs::path path(s.Get("out"));
        EnsureParent(path);
        WriteTextFile(path.string(), csv.str());
      }
      if (!all_passed) {
        err << "error: gradient_check: at least one check exceeded tolerance "
            << FormatDouble(grad_options.tolerance) << "\n";
        return kRuntimeFailure;
      }
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << OneLine(e.what()) << "\n";
    return e.IsValidationError() ? kValidationError : kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "error: runtime: " << OneLine(e.what()) << "\n";
    return kRuntimeFailure;
  }
  return kRuntimeFailure;
}

}  // namespace eppnet::cli
