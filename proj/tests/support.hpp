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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "nexception/layers.hpp"
#include "nexception/ops.hpp"

namespace nex::testing {

/// Largest relative gap between an analytic gradient and its central finite
/// difference estimate. Elements where both are below `floor` are compared on
/// the floor scale.
struct GradCheck {
  double max_rel = 0.0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
};

inline GradCheck gradcheck(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs, double h = 1e-5,
                           double floor = 1e-6) {
  for (auto& t : inputs) {
    t.zero_grad();
    t.set_requires_grad(true);
  }
  backward(loss_fn());
  GradCheck r;
  NoGradGuard no_grad;
  for (auto& t : inputs) {
    const std::vector<double> analytic = t.grad_vector();
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double x0 = t.at(i);
      t.set(i, x0 + h);
      const double fp = loss_fn().item();
      t.set(i, x0 - h);
      const double fm = loss_fn().item();
      t.set(i, x0);
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic[static_cast<size_t>(i)];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > r.max_rel) r = {rel, a, numeric};
    }
  }
  return r;
}

/// sum(y * R) for a fixed random R, so every output element gets a distinct
/// upstream gradient.
inline Tensor weighted_sum(const Tensor& y, const Tensor& r) { return sum(mul(y, r)); }

inline std::vector<Tensor> trainable_values(Module& m) {
  std::vector<Parameter*> ps;
  m.collect(ps);
  std::vector<Tensor> out;
  for (Parameter* p : ps) {
    if (p->trainable) out.push_back(p->value);
  }
  return out;
}

/// Re-initialises every trainable parameter with N(0, stddev) so checks do not
/// depend on zero-initialised biases or unit norm scales.
inline void randomize(Module& m, Rng& rng, double stddev = 0.5) {
  std::vector<Parameter*> ps;
  m.collect(ps);
  for (Parameter* p : ps) {
    if (p->trainable) p->value.assign(Tensor::randn(p->value.shape(), rng, stddev, p->value.dtype()));
  }
}

inline std::vector<double> values(const Tensor& t) { return t.to_vector(); }

}  // namespace nex::testing
