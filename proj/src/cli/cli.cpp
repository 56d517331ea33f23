// Copyright (c) 2026 NEXcepTion Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nexception/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nexception/cost.hpp"
#include "nexception/io/checkpoint.hpp"
#include "nexception/io/kvfile.hpp"
#include "nexception/kernels/kernels.hpp"
#include "nexception/nas/search.hpp"
#include "nexception/training/trainer.hpp"

namespace nex {

namespace fs = std::filesystem;

namespace {

std::string known_models() {
  std::string s;
  for (const auto& n : variant_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

void require_model(const std::string& name) {
  const auto& names = variant_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError("unknown model '" + name + "' (known: " + known_models() + ")");
  }
}

// Keys accepted in a run config file besides the training and architecture
// fields.
const std::vector<std::string>& run_keys() {
  static const std::vector<std::string> keys = {"model", "data", "dataset", "width", "val_fraction", "limit",
                                                "synthetic_classes", "synthetic_per_class"};
  return keys;
}

struct DataFlags {
  std::string data;
  std::string dataset = "cifar100";
  bool synthetic = false;
  int64_t synthetic_classes = 10;
  int64_t synthetic_per_class = 50;
  double val_fraction = 0.2;
  int64_t limit = 0;

  void add(CLI::App& app) {
    app.add_option("--data", data, "CIFAR binary file or extracted directory");
    app.add_option("--dataset", dataset, "Binary layout of --data: cifar100 or cifar10")
        ->check(CLI::IsMember({"cifar100", "cifar10"}));
    app.add_flag("--synthetic", synthetic, "Use the seeded class-coloured synthetic dataset instead of --data");
    app.add_option("--synthetic-classes", synthetic_classes, "Classes in the synthetic dataset");
    app.add_option("--synthetic-per-class", synthetic_per_class, "Images per class in the synthetic dataset");
    app.add_option("--val-fraction", val_fraction, "Fraction of the training records held out for validation");
    app.add_option("--limit", limit, "Use only the first N training records (0 = all)");
  }

  void validate() const {
    if (!synthetic && data.empty()) throw ConfigError("either --data PATH or --synthetic is required");
    if (!synthetic && !fs::exists(data)) throw ConfigError("dataset path does not exist: " + data);
    if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("--val-fraction must be in (0, 1)");
    if (limit < 0) throw ConfigError("--limit must be non-negative");
    if (synthetic && (synthetic_classes < 2 || synthetic_per_class < 1)) {
      throw ConfigError("synthetic dataset needs at least 2 classes and 1 image per class");
    }
  }

  std::pair<Dataset, Dataset> load(uint64_t seed) const {
    Dataset all = synthetic ? synthetic_dataset({synthetic_classes, synthetic_per_class, 32, 40.0, seed, "train"})
                            : load_cifar(data, dataset == "cifar10" ? CifarVariant::kCifar10 : CifarVariant::kCifar100);
    if (limit > 0 && static_cast<size_t>(limit) < all.size()) {
      std::vector<size_t> idx(static_cast<size_t>(limit));
      std::iota(idx.begin(), idx.end(), 0);
      all = all.subset(idx);
    }
    auto parts = split_dataset(all, val_fraction, seed ^ 0x5eedULL);
    if (parts.first.size() == 0 || parts.second.size() == 0) throw ConfigError("dataset too small for the split");
    return parts;
  }
};

struct ConfigFile {
  std::map<std::string, std::string> train, arch, run;
};

// Sorts the keys of a key = value file into training, architecture and run
// settings.
ConfigFile read_config_file(const std::string& path) {
  ConfigFile f;
  for (const auto& [k, v] : read_kv_file(path)) {
    if (TrainConfig::is_key(k)) {
      f.train[k] = v;
    } else if (std::any_of(search_dimensions().begin(), search_dimensions().end(),
                           [&](const SearchDimension& d) { return d.name == k; })) {
      f.arch[k] = v;
    } else if (std::find(run_keys().begin(), run_keys().end(), k) != run_keys().end()) {
      f.run[k] = v;
    } else {
      throw ConfigError(path + ": unknown key '" + k + "'");
    }
  }
  return f;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------- summarize

struct SummarizeCmd {
  std::string model;
  int64_t input = 0;
  int64_t classes = 1000;
  bool json = false;
  bool totals_only = false;

  void add(CLI::App& app) {
    app.add_option("model", model, "Model name: " + known_models())->required();
    app.add_option("--input", input, "Square input resolution (default: the model's native size)");
    app.add_option("--num-classes", classes, "Classifier outputs");
    app.add_flag("--json", json, "Emit the report as JSON");
    app.add_flag("--totals", totals_only, "Omit the per-layer rows");
  }

  int run(std::ostream& out) const {
    require_model(model);
    if (input < 0) throw ConfigError("--input must be positive");
    ModelOptions mo;
    mo.num_classes = classes;
    auto m = build_variant(model, mo);
    const CostReport r = count_cost(*m, input);
    if (json) {
      out << cost_to_json(r, !totals_only) << '\n';
    } else if (totals_only) {
      const std::string table = format_cost_table(r);
      out << table.substr(table.find("\nmodel ") + 1);
    } else {
      out << format_cost_table(r);
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- train

struct TrainCmd {
  std::string model = "reduced_nas";
  std::string config_file, arch_config, out_dir = "runs/train";
  std::optional<int64_t> epochs, batch_size, width, workers;
  std::optional<double> lr;
  std::optional<uint64_t> seed;
  std::vector<std::string> sets;
  bool no_wall_clock = false, quiet = false, model_from_flag = false;
  DataFlags data;

  void add(CLI::App& app) {
    app.add_option("--model", model, "Model name: " + known_models())->each([this](const std::string&) {
      model_from_flag = true;
    });
    app.add_option("--config", config_file, "Flat key = value file with training, architecture or data keys");
    app.add_option("--arch-config", arch_config, "Architecture file (as written by search) for reduced_nas");
    app.add_option("--epochs", epochs, "Training epochs");
    app.add_option("--batch-size", batch_size, "Mini-batch size");
    app.add_option("--lr", lr, "Peak learning rate");
    app.add_option("--seed", seed, "Seed for initialisation, shuffling and augmentation");
    app.add_option("--width", width, "Base width of reduced_nas");
    app.add_option("--workers", workers, "Augmentation threads (results do not depend on it)");
    app.add_option("--set", sets, "Override any training key, e.g. --set mixup_alpha=0");
    app.add_option("--out", out_dir, "Output directory for metrics.csv, summary.json and best.ckpt");
    app.add_flag("--no-wall-clock", no_wall_clock, "Write 0 in the seconds column so reruns are byte-identical");
    app.add_flag("--quiet", quiet, "Do not print per-epoch progress");
    data.add(app);
  }

  int run(std::ostream& out, std::ostream& err) {
    // Resolve and validate everything before touching the filesystem.
    ConfigFile file;
    if (!config_file.empty()) file = read_config_file(config_file);
    auto& run_kv = file.run;
    auto& arch_kv = file.arch;
    if (run_kv.count("model") && model_from_flag == false) model = run_kv["model"];
    require_model(model);
    TrainConfig cfg = train_defaults(model);
    cfg.apply(file.train);
    if (run_kv.count("data") && data.data.empty()) data.data = run_kv["data"];
    if (run_kv.count("dataset")) data.dataset = run_kv["dataset"];
    if (run_kv.count("val_fraction")) data.val_fraction = std::stod(run_kv["val_fraction"]);
    if (run_kv.count("limit")) data.limit = std::stoll(run_kv["limit"]);
    if (run_kv.count("synthetic_classes")) data.synthetic_classes = std::stoll(run_kv["synthetic_classes"]);
    if (run_kv.count("synthetic_per_class")) data.synthetic_per_class = std::stoll(run_kv["synthetic_per_class"]);
    int64_t w = run_kv.count("width") ? std::stoll(run_kv["width"]) : 16;
    if (!arch_config.empty()) {
      for (const auto& [k, v] : read_kv_file(arch_config)) arch_kv[k] = v;
    }
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (lr) cfg.learning_rate = *lr;
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (width) w = *width;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      cfg.apply({{s.substr(0, eq), s.substr(eq + 1)}});
    }
    if (cfg.warmup_epochs >= static_cast<double>(cfg.epochs)) cfg.warmup_epochs = static_cast<double>(cfg.epochs - 1);
    cfg.validate();
    const ArchConfig arch = ArchConfig::from_map(arch_kv);
    if (!arch_kv.empty() && model != "reduced_nas") throw ConfigError("architecture keys apply to reduced_nas only");
    data.validate();

    auto [train, val] = data.load(cfg.seed);
    ModelOptions mo;
    mo.num_classes = train.num_classes;
    mo.seed = cfg.seed;
    mo.drop_path = cfg.stoch_depth;
    mo.nas_width = w;
    auto net = build_variant(model, mo, &arch);

    TrainOptions opt;
    opt.out_dir = out_dir;
    opt.wall_clock = !no_wall_clock;
    if (!quiet) {
      opt.on_epoch = [&out](const EpochMetrics& m) {
        out << "epoch " << m.epoch << "  lr " << m.lr << "  train_loss " << m.train_loss << "  val_loss " << m.val_loss
            << "  top1 " << m.val_top1 << "  top5 " << m.val_top5 << '\n';
      };
    }
    try {
      const TrainResult r = train_epochs(*net, train, &val, cfg, opt);
      out << "best top1 " << r.best_top1 << " at epoch " << r.best_epoch << "; artifacts in " << out_dir << '\n';
    } catch (const DivergenceError& e) {
      err << "error: " << e.what() << '\n';
      return kExitDiverged;
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- search

struct SearchCmd {
  int64_t trials = 20;
  double wall_seconds = 0;
  std::string strategy = "smbo", oracle = "train", out_dir = "runs/search";
  int64_t budget_epochs = 3, width = 8, initial = 16, candidates = 500;
  uint64_t seed = 0;
  bool quiet = false;
  DataFlags data;

  void add(CLI::App& app) {
    app.add_option("--trials", trials, "Maximum number of evaluated configurations");
    app.add_option("--wall-seconds", wall_seconds, "Wall-clock budget in seconds (0 = trials only)");
    app.add_option("--strategy", strategy, "random or smbo")->check(CLI::IsMember({"random", "smbo"}));
    app.add_option("--oracle", oracle, "train: train each reduced network; planted: synthetic objective")
        ->check(CLI::IsMember({"train", "planted"}));
    app.add_option("--epochs", budget_epochs, "Training epochs per trial");
    app.add_option("--width", width, "Base width of the reduced network");
    app.add_option("--initial-design", initial, "Random configurations before the surrogate takes over");
    app.add_option("--candidates", candidates, "Random candidates scored by expected improvement per proposal");
    app.add_option("--seed", seed, "Search seed");
    app.add_option("--out", out_dir, "Output directory for history.jsonl and incumbent.cfg");
    app.add_flag("--quiet", quiet, "Do not print per-trial progress");
    data.add(app);
  }

  int run(std::ostream& out) {
    if (trials < 1) throw ConfigError("--trials must be at least 1");
    if (wall_seconds < 0) throw ConfigError("--wall-seconds must be non-negative");
    if (budget_epochs < 1) throw ConfigError("--epochs must be at least 1");
    if (width < 2) throw ConfigError("--width must be at least 2");
    const bool planted = oracle == "planted";
    if (!planted) data.validate();

    SearchOptions so;
    so.strategy = parse_strategy(strategy);
    so.max_trials = trials;
    so.wall_seconds = wall_seconds;
    so.initial_design = initial;
    so.candidates = candidates;
    so.seed = seed;

    std::optional<std::pair<Dataset, Dataset>> sets;
    if (!planted) sets = data.load(seed);
    NasEvalOptions eo;
    eo.width = width;
    eo.train = nas_train_defaults();
    TrialFn objective = [&](const ArchConfig& cfg, uint64_t s) {
      if (planted) {
        TrialRecord r;
        ModelOptions mo;
        mo.num_classes = 10;
        mo.nas_width = width;
        const CostReport c = count_cost(*build_variant("reduced_nas", mo, &cfg));
        r.val_accuracy = planted_objective(cfg);
        r.params = c.total_params;
        r.flops = c.total_flops;
        return r;
      }
      return evaluate_config(cfg, sets->first, sets->second, budget_epochs, s, eo);
    };

    fs::create_directories(out_dir);
    const fs::path history = fs::path(out_dir) / "history.jsonl";
    std::ofstream(history, std::ios::trunc).close();
    so.on_trial = [&](const TrialRecord& r) {
      append_history(history, r);
      if (!quiet) {
        out << "trial " << r.index << "  acc " << r.val_accuracy << (r.diverged ? "  (diverged)" : "") << '\n';
      }
    };
    const SearchResult res = search(objective, so);
    write_kv_file(fs::path(out_dir) / "incumbent.cfg", res.incumbent.config.to_map(),
                  "incumbent of " + std::to_string(res.history.size()) + " trials, accuracy " +
                      std::to_string(res.incumbent.val_accuracy));
    out << "incumbent trial " << res.incumbent.index << " accuracy " << res.incumbent.val_accuracy << '\n';
    for (const auto& [k, v] : res.incumbent.config.to_map()) out << "  " << k << " = " << v << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------- importance

struct ImportanceCmd {
  std::string history;
  std::string out_file;
  bool json = false;
  uint64_t seed = 0;

  void add(CLI::App& app) {
    app.add_option("history", history, "history.jsonl written by search")->required();
    app.add_flag("--json", json, "Emit JSON instead of a table");
    app.add_option("--out", out_file, "Also write the JSON report to this file");
    app.add_option("--seed", seed, "Surrogate seed");
  }

  int run(std::ostream& out) const {
    if (!fs::exists(history)) throw ConfigError("history file not found: " + history);
    const auto trials = read_history(history);
    if (trials.size() < 2) throw ConfigError("importance needs at least 2 trials, found " + std::to_string(trials.size()));
    const TrialRecord& inc = best_trial(trials);
    const auto imp = lpi_importance(trials, inc.config, seed);
    nlohmann::ordered_json j;
    for (const auto& [k, v] : imp) j[k] = v;
    if (!out_file.empty()) std::ofstream(out_file) << j.dump(2) << '\n';
    if (json) {
      out << j.dump(2) << '\n';
      return kExitOk;
    }
    out << "local importance at trial " << inc.index << " (accuracy " << inc.val_accuracy << ", " << trials.size()
        << " trials)\n";
    size_t wn = 0;
    for (const auto& [k, v] : imp) wn = std::max(wn, k.size());
    auto sorted = imp;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    char line[128];
    for (const auto& [k, v] : sorted) {
      std::snprintf(line, sizeof line, "  %-*s  %.4f\n", static_cast<int>(wn), k.c_str(), v);
      out << line;
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- bench

struct BenchCmd {
  std::string model;
  int64_t batch = 8, reps = 30, warmup = 3, input = 0, threads = 1;
  bool json = false;
  std::string kernels = "auto";

  void add(CLI::App& app) {
    app.add_option("model", model, "Model name: " + known_models())->required();
    app.add_option("--batch", batch, "Images per forward pass");
    app.add_option("--reps", reps, "Timed repetitions");
    app.add_option("--warmup", warmup, "Untimed warmup repetitions");
    app.add_option("--input", input, "Square input resolution (default: native)");
    app.add_option("--threads", threads, "Kernel threads; only 1 is supported and it is reported as such");
    app.add_option("--kernels", kernels, "Kernel table: auto, scalar or avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
    app.add_flag("--json", json, "Emit JSON");
  }

  int run(std::ostream& out) const {
    require_model(model);
    if (batch < 1 || reps < 1 || warmup < 0 || input < 0) throw ConfigError("bench: sizes must be positive");
    if (threads != 1) throw ConfigError("bench: only --threads 1 is supported");
    if (kernels == "scalar") kernels::select(kernels::Isa::kScalar);
    if (kernels == "avx2") kernels::select(kernels::Isa::kAvx2);
    auto m = build_variant(model);
    const int64_t hw = input > 0 ? input : m->input_hw();
    Rng rng(0);
    const Tensor x = Tensor::randn({batch, 3, hw, hw}, rng);
    NoGradGuard no_grad;
    ForwardContext ctx;
    for (int64_t i = 0; i < warmup; ++i) m->forward(x, ctx);
    std::vector<double> ips;
    for (int64_t i = 0; i < reps; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      m->forward(x, ctx);
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      ips.push_back(static_cast<double>(batch) / s);
    }
    const double mean = mean_of(ips), sd = stddev_of(ips);
    const char* isa = kernels::isa_name(kernels::active().isa);
    if (json) {
      nlohmann::ordered_json j{{"model", model}, {"input_hw", hw},   {"batch", batch},
                               {"reps", reps},   {"warmup", warmup}, {"threads", threads},
                               {"kernels", isa}, {"mean", mean},     {"std", sd}};
      out << j.dump(2) << '\n';
    } else {
      out << model << " @" << hw << "  batch " << batch << "  reps " << reps << "  threads " << threads << "  kernels "
          << isa << "\n  throughput " << mean << " +/- " << sd << " images/s (CPU)\n";
    }
    return kExitOk;
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"NEXcepTion toolkit: build, inspect, train and search NEXcepTion networks", "nexception"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SummarizeCmd summarize;
  TrainCmd train;
  SearchCmd search_cmd;
  ImportanceCmd importance;
  BenchCmd bench;
  auto* s_app = app.add_subcommand("summarize", "Per-layer shapes, parameters and FLOPs of a model");
  summarize.add(*s_app);
  auto* t_app = app.add_subcommand("train", "Train a model with the recipe and write metrics and checkpoints");
  train.add(*t_app);
  auto* n_app = app.add_subcommand("search", "Architecture search over the reduced network");
  search_cmd.add(*n_app);
  auto* i_app = app.add_subcommand("importance", "Local hyperparameter importance from a search history");
  importance.add(*i_app);
  auto* b_app = app.add_subcommand("bench", "CPU inference throughput, mean and std over repetitions");
  bench.add(*b_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help is raised with the subcommand as the error's app.
    if (e.get_exit_code() == 0) {
      std::ostringstream os;
      app.exit(e, os, err);
      out << os.str();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (s_app->parsed()) return summarize.run(out);
    if (t_app->parsed()) return train.run(out, err);
    if (n_app->parsed()) return search_cmd.run(out);
    if (i_app->parsed()) return importance.run(out);
    if (b_app->parsed()) return bench.run(out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::invalid_argument& e) {
    err << "error: invalid number in configuration (" << e.what() << ")\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace nex
