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

#include "nexception/nas/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nex {

std::vector<double> one_hot_features(const ArchConfig& cfg) {
  const auto idx = encode(cfg);
  std::vector<double> f;
  const auto& dims = search_dimensions();
  for (size_t d = 0; d < dims.size(); ++d) {
    for (size_t v = 0; v < dims[d].values.size(); ++v) f.push_back(static_cast<int>(v) == idx[d] ? 1.0 : 0.0);
  }
  return f;
}

void RandomForest::fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  if (x.empty() || x.size() != y.size()) throw ConfigError("forest: need matching, non-empty x and y");
  const double n = static_cast<double>(y.size());
  y_mean_ = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double var = 0;
  for (double v : y) var += (v - y_mean_) * (v - y_mean_);
  y_scale_ = var > 0 ? std::sqrt(var / n) : 1.0;
  std::vector<double> z(y.size());
  for (size_t i = 0; i < y.size(); ++i) z[i] = (y[i] - y_mean_) / y_scale_;

  Rng rng(options_.seed);
  std::uniform_int_distribution<size_t> pick(0, y.size() - 1);
  trees_.assign(static_cast<size_t>(options_.trees), {});
  for (auto& tree : trees_) {
    std::vector<size_t> rows(y.size());
    for (auto& r : rows) r = pick(rng);
    grow(tree, x, z, rows, 0, rng);
  }
}

int RandomForest::grow(Tree& tree, const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                       std::vector<size_t>& rows, int64_t depth, Rng& rng) const {
  const int id = static_cast<int>(tree.size());
  tree.push_back({});
  double sum = 0;
  for (size_t r : rows) sum += y[r];
  const double n = static_cast<double>(rows.size());
  tree[static_cast<size_t>(id)].value = sum / n;
  double lo = y[rows[0]], hi = y[rows[0]];
  for (size_t r : rows) {
    lo = std::min(lo, y[r]);
    hi = std::max(hi, y[r]);
  }
  if (depth >= options_.max_depth || static_cast<int64_t>(rows.size()) < 2 * options_.min_leaf || hi - lo <= 1e-12) {
    return id;
  }

  const size_t p = x[0].size();
  std::vector<size_t> feats(p);
  std::iota(feats.begin(), feats.end(), 0);
  const auto k = std::max<size_t>(1, static_cast<size_t>(std::lround(options_.feature_fraction * static_cast<double>(p))));
  for (size_t i = 0; i < k && i < p; ++i) {
    std::uniform_int_distribution<size_t> d(i, p - 1);
    std::swap(feats[i], feats[d(rng)]);
  }
  std::sort(feats.begin(), feats.begin() + static_cast<std::ptrdiff_t>(std::min(k, p)));

  int best_f = -1;
  double best_gain = 0;
  const double base = sum * sum / n;
  for (size_t i = 0; i < std::min(k, p); ++i) {
    const size_t f = feats[i];
    double sl = 0, sr = 0;
    int64_t nl = 0, nr = 0;
    for (size_t r : rows) {
      if (x[r][f] > 0.5) {
        sr += y[r];
        ++nr;
      } else {
        sl += y[r];
        ++nl;
      }
    }
    if (nl < options_.min_leaf || nr < options_.min_leaf || nl == 0 || nr == 0) continue;
    const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) - base;
    // Relative margin keeps near-ties stable under rescaled targets.
    if (gain > 1e-12 && gain > best_gain * (1 + 1e-9)) {
      best_gain = gain;
      best_f = static_cast<int>(f);
    }
  }
  if (best_f < 0) return id;

  std::vector<size_t> left, right;
  for (size_t r : rows) (x[r][static_cast<size_t>(best_f)] > 0.5 ? right : left).push_back(r);
  const int l = grow(tree, x, y, left, depth + 1, rng);
  const int rr = grow(tree, x, y, right, depth + 1, rng);
  Node& node = tree[static_cast<size_t>(id)];
  node.feature = best_f;
  node.left = l;
  node.right = rr;
  return id;
}

std::pair<double, double> RandomForest::predict(const std::vector<double>& x) const {
  if (trees_.empty()) throw ConfigError("forest: predict before fit");
  double s = 0, s2 = 0;
  for (const auto& tree : trees_) {
    const Node* node = &tree[0];
    while (node->feature >= 0) node = &tree[static_cast<size_t>(x[static_cast<size_t>(node->feature)] > 0.5 ? node->right : node->left)];
    s += node->value;
    s2 += node->value * node->value;
  }
  const double t = static_cast<double>(trees_.size());
  const double mean = s / t;
  const double var = std::max(0.0, s2 / t - mean * mean);
  return {y_mean_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

double expected_improvement(double mean, double stddev, double best, double xi) {
  const double d = mean - best - xi;
  if (stddev <= 1e-12) return std::max(d, 0.0);
  const double z = d / stddev;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
  return d * cdf + stddev * pdf;
}

}  // namespace nex
