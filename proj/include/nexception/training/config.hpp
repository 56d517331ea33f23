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

#include <map>
#include <string>

namespace nex {

enum class LossKind { kBCE, kCE };

/// The training recipe. Field defaults are the NEXcepTion-T column; use
/// train_defaults() for the other variants.
struct TrainConfig {
  double learning_rate = 2e-3;
  double weight_decay = 0.02;
  int64_t batch_size = 256;
  int64_t epochs = 300;
  double warmup_epochs = 5;
  double min_lr = 1e-6;
  bool randaugment = true;
  double randaugment_magnitude = 7;
  double randaugment_std = 0.5;
  int64_t randaugment_ops = 2;
  double mixup_alpha = 0.1;
  double cutmix_alpha = 1.0;
  double random_erasing = 0.0;
  double label_smoothing = 0.0;
  double stoch_depth = 0.05;
  LossKind loss = LossKind::kBCE;
  double test_crop_ratio = 0.95;
  uint64_t seed = 0;
  int64_t workers = 1;  // augmentation threads; results do not depend on it

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::map<std::string, std::string> to_map() const;
  /// Overrides the fields named in `kv`; unknown keys throw.
  void apply(const std::map<std::string, std::string>& kv);
  static bool is_key(const std::string& key);
};

/// Per-variant recipe: nexception_s trains at 1.4e-3 with batch 128, the
/// other variants at 2e-3 with batch 256.
TrainConfig train_defaults(const std::string& variant);

}  // namespace nex
