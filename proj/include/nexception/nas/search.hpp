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

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nexception/arch_config.hpp"
#include "nexception/io/dataset.hpp"
#include "nexception/training/config.hpp"

namespace nex {

/// Uniform draw over the product space.
ArchConfig sample_config(Rng& rng);

struct TrialRecord {
  int64_t index = 0;
  ArchConfig config;
  double val_accuracy = 0;
  int64_t params = 0;
  int64_t flops = 0;
  int64_t epochs_trained = 0;
  double wall_seconds = 0;
  uint64_t seed = 0;
  bool diverged = false;
  std::string note;
};

/// Equality of everything except wall time.
bool same_outcome(const TrialRecord& a, const TrialRecord& b);

std::string trial_to_json(const TrialRecord& r);
TrialRecord trial_from_json(const std::string& line);
void append_history(const std::filesystem::path& path, const TrialRecord& r);
std::vector<TrialRecord> read_history(const std::filesystem::path& path);

struct NasEvalOptions {
  int64_t width = 16;          // reduced network base width
  TrainConfig train;           // recipe; epochs is overridden by the budget
  bool wall_clock = true;
};

/// Search-friendly recipe for the reduced network on 32x32 data: no
/// RandAugment, no mixing, no stochastic depth, one warmup epoch.
TrainConfig nas_train_defaults();

/// Trains reduced_nas(config) on `train` for `budget_epochs` and scores top-1
/// on `val`. Divergence yields accuracy 0 with the flag set.
TrialRecord evaluate_config(const ArchConfig& config, const Dataset& train, const Dataset& val,
                            int64_t budget_epochs, uint64_t seed, const NasEvalOptions& options = {});

/// 0.4 + 0.4 [bottleneck on] + 0.04 [kernel_middle == 5]. Maximum 0.84.
double planted_objective(const ArchConfig& cfg);

enum class Strategy { kRandom, kSmbo };
Strategy parse_strategy(const std::string& name);

struct SearchOptions {
  Strategy strategy = Strategy::kSmbo;
  int64_t max_trials = 50;
  double wall_seconds = 0;     // 0 = unlimited
  int64_t initial_design = 16;
  int64_t candidates = 500;
  uint64_t seed = 0;
  std::function<void(const TrialRecord&)> on_trial;
};

struct SearchResult {
  TrialRecord incumbent;
  std::vector<TrialRecord> history;
};

/// Objective: builds the record for one configuration; `seed` is the
/// per-trial seed the loop derives.
using TrialFn = std::function<TrialRecord(const ArchConfig&, uint64_t seed)>;

/// Runs until max_trials or the wall budget, whichever comes first. A trial
/// that completes after the deadline is discarded; if none completes in time
/// the call throws ConfigError.
SearchResult search(const TrialFn& objective, const SearchOptions& options);

/// Local importance at `incumbent`: for each dimension the variance of the
/// surrogate's predictions over that dimension's domain, normalised to sum
/// to 1 (or all 0 when every variance is 0). Throws with fewer than 2 trials.
std::vector<std::pair<std::string, double>> lpi_importance(const std::vector<TrialRecord>& history,
                                                           const ArchConfig& incumbent, uint64_t seed = 0);

/// Best record by accuracy, earliest on ties.
const TrialRecord& best_trial(const std::vector<TrialRecord>& history);

}  // namespace nex
