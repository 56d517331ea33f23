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
#include <string>
#include <vector>

#include "nexception/io/dataset.hpp"
#include "nexception/io/metrics.hpp"
#include "nexception/model.hpp"
#include "nexception/training/config.hpp"

namespace nex {

/// Non-finite loss or activations during training.
class DivergenceError : public NumericError {
 public:
  DivergenceError(int64_t step, const std::string& what)
      : NumericError("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  int64_t step() const { return step_; }

 private:
  int64_t step_;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no files written
  bool wall_clock = true;         // false writes 0 in the seconds column
  bool verbose = false;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::vector<double> step_lr;  // learning rate used at every optimizer step
  std::vector<double> step_loss;
  double best_top1 = 0.0;
  int64_t best_epoch = -1;
  int64_t steps = 0;
};

/// Runs the recipe. Each epoch shuffles deterministically and drops the last
/// partial batch; the batch size is clamped to the dataset size. When
/// `val` is null the validation columns are 0 and the last epoch counts as
/// best. Throws DivergenceError on a non-finite loss.
TrainResult train_epochs(ModelGraph& model, const Dataset& train, const Dataset* val, const TrainConfig& cfg,
                         const TrainOptions& options = {});

struct EvalResult {
  double top1 = 0;
  double top5 = 0;
  double loss = 0;
  int64_t count = 0;
};

/// Eval-mode pass with the resize/centre-crop transform. Ties in top-k go to
/// the lower class index.
EvalResult evaluate(ModelGraph& model, const Dataset& data, const TrainConfig& cfg, int64_t batch_size = 64);

/// Top-k hits for one row of logits, first-index tie-break.
bool in_top_k(std::span<const double> logits, int64_t label, int64_t k);

}  // namespace nex
