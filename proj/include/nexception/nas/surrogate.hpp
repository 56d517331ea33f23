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

#include <cstdint>
#include <vector>

#include "nexception/arch_config.hpp"
#include "nexception/tensor.hpp"

namespace nex {

/// One-hot encoding over every search dimension, in search_dimensions() order.
std::vector<double> one_hot_features(const ArchConfig& cfg);

struct ForestOptions {
  int64_t trees = 48;
  int64_t max_depth = 10;
  int64_t min_leaf = 1;
  double feature_fraction = 0.5;  // features tried per split
  uint64_t seed = 0;
};

/// Random forest regressor over binary features. Targets are standardised
/// before fitting so predictions are equivariant under affine rescaling.
class RandomForest {
 public:
  explicit RandomForest(ForestOptions options = {}) : options_(options) {}
  void fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y);
  /// Mean and standard deviation of the per-tree predictions.
  std::pair<double, double> predict(const std::vector<double>& x) const;
  bool fitted() const { return !trees_.empty(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double value = 0;
    int left = -1, right = -1;
  };
  using Tree = std::vector<Node>;
  int grow(Tree& tree, const std::vector<std::vector<double>>& x, const std::vector<double>& y,
           std::vector<size_t>& rows, int64_t depth, Rng& rng) const;

  ForestOptions options_;
  std::vector<Tree> trees_;
  double y_mean_ = 0, y_scale_ = 1;
};

/// Expected improvement over `best` for a maximisation problem.
double expected_improvement(double mean, double stddev, double best, double xi = 0.0);

}  // namespace nex
