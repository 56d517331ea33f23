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

#include <vector>

#include "nexception/tensor.hpp"
#include "nexception/training/config.hpp"

namespace nex {

/// Linear warmup from min_lr to the peak over warmup_epochs, then cosine
/// decay to min_lr at `epochs`. `epoch` may be fractional.
double cosine_warmup_lr(double epoch, const TrainConfig& cfg);

struct LambOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  // Test hook: with the trust ratio pinned to 1 the update is Adam's.
  bool unit_trust_ratio = false;
};

/// Layer-wise adaptive moments. Each parameter tensor is one layer for the
/// trust ratio.
class Lamb {
 public:
  explicit Lamb(std::vector<Parameter*> params, LambOptions options = {});

  /// One update with the given learning rate. Decay-exempt parameters use a
  /// zero decay. Missing gradients count as zero. Throws NumericError naming
  /// the parameter when a gradient is not finite.
  void step(double lr, double weight_decay);

  int64_t steps() const { return steps_; }
  const LambOptions& options() const { return options_; }
  /// Trust ratio applied to parameter i in the most recent step.
  double trust_ratio(size_t i) const { return slots_.at(i).phi; }
  size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    Parameter* param;
    std::vector<double> m, v;
    double phi = 1.0;
  };
  LambOptions options_;
  std::vector<Slot> slots_;
  int64_t steps_ = 0;
};

}  // namespace nex
