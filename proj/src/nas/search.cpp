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

#include "nexception/nas/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"
#include "nexception/cost.hpp"
#include "nexception/nas/surrogate.hpp"
#include "nexception/training/augment.hpp"
#include "nexception/training/trainer.hpp"

namespace nex {

using nlohmann::json;

ArchConfig sample_config(Rng& rng) {
  std::vector<int> idx;
  for (const auto& d : search_dimensions()) {
    std::uniform_int_distribution<int> u(0, static_cast<int>(d.values.size()) - 1);
    idx.push_back(u(rng));
  }
  return decode(idx);
}

bool same_outcome(const TrialRecord& a, const TrialRecord& b) {
  return a.index == b.index && a.config == b.config && a.val_accuracy == b.val_accuracy && a.params == b.params &&
         a.flops == b.flops && a.epochs_trained == b.epochs_trained && a.seed == b.seed && a.diverged == b.diverged;
}

std::string trial_to_json(const TrialRecord& r) {
  nlohmann::ordered_json j;
  j["index"] = r.index;
  j["config"] = r.config.to_map();
  j["val_accuracy"] = r.val_accuracy;
  j["params"] = r.params;
  j["flops"] = r.flops;
  j["epochs_trained"] = r.epochs_trained;
  j["wall_seconds"] = r.wall_seconds;
  j["seed"] = r.seed;
  j["diverged"] = r.diverged;
  if (!r.note.empty()) j["note"] = r.note;
  return j.dump();
}

TrialRecord trial_from_json(const std::string& line) {
  TrialRecord r;
  try {
    const json j = json::parse(line);
    r.index = j.value("index", int64_t{0});
    r.config = ArchConfig::from_map(j.at("config").get<std::map<std::string, std::string>>());
    r.val_accuracy = j.at("val_accuracy").get<double>();
    r.params = j.value("params", int64_t{0});
    r.flops = j.value("flops", int64_t{0});
    r.epochs_trained = j.value("epochs_trained", int64_t{0});
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.seed = j.value("seed", uint64_t{0});
    r.diverged = j.value("diverged", false);
    r.note = j.value("note", std::string());
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed trial record: ") + e.what());
  }
  if (!(r.val_accuracy >= 0 && r.val_accuracy <= 1)) throw FormatError("trial accuracy outside [0, 1]");
  return r;
}

void append_history(const std::filesystem::path& path, const TrialRecord& r) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw FormatError("cannot append to " + path.string());
  out << trial_to_json(r) << '\n';
}

std::vector<TrialRecord> read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read history " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(trial_from_json(line));
  }
  return out;
}

TrainConfig nas_train_defaults() {
  TrainConfig c;
  c.learning_rate = 5e-3;
  c.min_lr = 1e-5;
  c.batch_size = 32;
  c.epochs = 10;
  c.warmup_epochs = 1;
  c.randaugment = false;
  c.mixup_alpha = 0.0;
  c.cutmix_alpha = 0.0;
  c.stoch_depth = 0.0;
  c.test_crop_ratio = 1.0;
  return c;
}

TrialRecord evaluate_config(const ArchConfig& config, const Dataset& train, const Dataset& val,
                            int64_t budget_epochs, uint64_t seed, const NasEvalOptions& options) {
  if (budget_epochs < 1) throw ConfigError("evaluate_config: budget must be at least one epoch");
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig cfg = options.train;
  cfg.epochs = budget_epochs;
  cfg.seed = seed;
  cfg.warmup_epochs = std::min(cfg.warmup_epochs, static_cast<double>(budget_epochs - 1));
  cfg.validate();

  ModelOptions mo;
  mo.num_classes = std::max(train.num_classes, val.num_classes);
  mo.input_hw = train.hw;
  mo.seed = seed;
  mo.drop_path = cfg.stoch_depth;
  mo.nas_width = options.width;
  auto model = build_variant("reduced_nas", mo, &config);
  const CostReport cost = count_cost(*model);

  TrialRecord r;
  r.config = config;
  r.params = cost.total_params;
  r.flops = cost.total_flops;
  r.seed = seed;
  try {
    train_epochs(*model, train, nullptr, cfg);
    r.epochs_trained = budget_epochs;
    r.val_accuracy = evaluate(*model, val, cfg).top1;
  } catch (const DivergenceError& e) {
    r.diverged = true;
    r.val_accuracy = 0;
    r.epochs_trained = e.step() / std::max<int64_t>(1, static_cast<int64_t>(train.size()) / std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(train.size())));
    r.note = e.what();
  } catch (const NumericError& e) {
    r.diverged = true;
    r.val_accuracy = 0;
    r.epochs_trained = budget_epochs;
    r.note = e.what();
  }
  if (options.wall_clock) r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double planted_objective(const ArchConfig& cfg) {
  return 0.4 + (cfg.bottleneck == Bottleneck::kInverted3 ? 0.4 : 0.0) + (cfg.kernel_middle == 5 ? 0.04 : 0.0);
}

Strategy parse_strategy(const std::string& name) {
  if (name == "random") return Strategy::kRandom;
  if (name == "smbo") return Strategy::kSmbo;
  throw ConfigError("unknown strategy '" + name + "' (known: random, smbo)");
}

const TrialRecord& best_trial(const std::vector<TrialRecord>& history) {
  if (history.empty()) throw ConfigError("empty history");
  size_t best = 0;
  for (size_t i = 1; i < history.size(); ++i) {
    if (history[i].val_accuracy > history[best].val_accuracy) best = i;
  }
  return history[best];
}

SearchResult search(const TrialFn& objective, const SearchOptions& options) {
  if (options.max_trials < 1) throw ConfigError("search: max_trials must be at least 1");
  if (options.wall_seconds < 0) throw ConfigError("search: wall budget must be non-negative");
  if (options.candidates < 1) throw ConfigError("search: candidates must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  const bool timed = options.wall_seconds > 0;

  Rng rng(options.seed);
  SearchResult result;
  std::set<std::vector<int>> seen;
  auto fresh_sample = [&] {
    ArchConfig c = sample_config(rng);
    for (int tries = 0; tries < 64 && seen.count(encode(c)); ++tries) c = sample_config(rng);
    return c;
  };

  for (int64_t t = 0; t < options.max_trials; ++t) {
    if (timed && elapsed() >= options.wall_seconds) break;
    ArchConfig cfg;
    if (options.strategy == Strategy::kRandom || t < options.initial_design || result.history.size() < 2) {
      cfg = fresh_sample();
    } else {
      std::vector<std::vector<double>> x;
      std::vector<double> y;
      for (const auto& r : result.history) {
        x.push_back(one_hot_features(r.config));
        y.push_back(r.val_accuracy);
      }
      RandomForest forest(ForestOptions{.seed = sample_seed(options.seed, static_cast<uint64_t>(t), 1, 0)});
      forest.fit(x, y);
      const double best = best_trial(result.history).val_accuracy;
      double best_ei = -1;
      for (int64_t c = 0; c < options.candidates; ++c) {
        ArchConfig cand = sample_config(rng);
        if (seen.count(encode(cand))) continue;
        const auto [mu, sd] = forest.predict(one_hot_features(cand));
        const double ei = expected_improvement(mu, sd, best);
        if (ei > best_ei) {
          best_ei = ei;
          cfg = cand;
        }
      }
      if (best_ei < 0) cfg = fresh_sample();
    }
    const uint64_t trial_seed = sample_seed(options.seed, static_cast<uint64_t>(t), 0, 0);
    TrialRecord rec = objective(cfg, trial_seed);
    rec.index = t;
    rec.config = cfg;
    rec.seed = trial_seed;
    if (timed && elapsed() > options.wall_seconds) break;
    seen.insert(encode(cfg));
    result.history.push_back(rec);
    if (options.on_trial) options.on_trial(rec);
  }
  if (result.history.empty()) throw ConfigError("search: budget exhausted before the first evaluation completed");
  result.incumbent = best_trial(result.history);
  return result;
}

std::vector<std::pair<std::string, double>> lpi_importance(const std::vector<TrialRecord>& history,
                                                           const ArchConfig& incumbent, uint64_t seed) {
  if (history.size() < 2) throw ConfigError("importance needs at least 2 trials, got " + std::to_string(history.size()));
  const auto& dims = search_dimensions();
  std::vector<std::pair<std::string, double>> out;
  for (const auto& d : dims) out.emplace_back(d.name, 0.0);

  double lo = history[0].val_accuracy, hi = lo;
  for (const auto& r : history) {
    lo = std::min(lo, r.val_accuracy);
    hi = std::max(hi, r.val_accuracy);
  }
  if (hi == lo) return out;

  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& r : history) {
    x.push_back(one_hot_features(r.config));
    y.push_back(r.val_accuracy);
  }
  RandomForest forest(ForestOptions{.trees = 128, .seed = seed});
  forest.fit(x, y);

  const std::vector<int> base = encode(incumbent);
  double total = 0;
  for (size_t d = 0; d < dims.size(); ++d) {
    std::vector<double> preds;
    std::vector<int> idx = base;
    for (size_t v = 0; v < dims[d].values.size(); ++v) {
      idx[d] = static_cast<int>(v);
      preds.push_back(forest.predict(one_hot_features(decode(idx))).first);
    }
    double m = 0;
    for (double p : preds) m += p;
    m /= static_cast<double>(preds.size());
    double var = 0;
    for (double p : preds) var += (p - m) * (p - m);
    out[d].second = var / static_cast<double>(preds.size());
    total += out[d].second;
  }
  if (total <= 0) {
    for (auto& [k, v] : out) v = 0;
    return out;
  }
  for (auto& [k, v] : out) v /= total;
  return out;
}

}  // namespace nex
