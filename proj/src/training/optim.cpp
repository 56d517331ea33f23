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

#include "nexception/training/optim.hpp"

#include <cmath>
#include <numbers>

namespace nex {

double cosine_warmup_lr(double epoch, const TrainConfig& cfg) {
  const double peak = cfg.learning_rate, lo = cfg.min_lr;
  const double w = cfg.warmup_epochs, e_max = static_cast<double>(cfg.epochs);
  if (epoch <= 0) return w > 0 ? lo : peak;
  if (epoch < w) return lo + (peak - lo) * (epoch / w);
  if (epoch >= e_max) return lo;
  const double t = (epoch - w) / (e_max - w);
  // Anchor each half at its own endpoint so both ends come out exact.
  if (t <= 0.5) return peak - 0.5 * (peak - lo) * (1.0 - std::cos(std::numbers::pi * t));
  return lo + 0.5 * (peak - lo) * (1.0 + std::cos(std::numbers::pi * t));
}

Lamb::Lamb(std::vector<Parameter*> params, LambOptions options) : options_(options) {
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    const auto n = static_cast<size_t>(p->value.numel());
    slots_.push_back(Slot{p, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  }
}

void Lamb::step(double lr, double weight_decay) {
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  std::vector<double> r;
  for (Slot& s : slots_) {
    Tensor& w = s.param->value;
    const std::vector<double> g = w.has_grad() ? w.grad_vector() : std::vector<double>(s.m.size(), 0.0);
    const std::vector<double> wv = w.to_vector();
    const double lambda = s.param->weight_decay_exempt ? 0.0 : weight_decay;
    r.assign(g.size(), 0.0);
    double wn = 0, rn = 0;
    for (size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) throw NumericError("non-finite gradient in parameter " + s.param->name);
      s.m[i] = b1 * s.m[i] + (1 - b1) * g[i];
      s.v[i] = b2 * s.v[i] + (1 - b2) * g[i] * g[i];
      const double mh = s.m[i] / c1, vh = s.v[i] / c2;
      r[i] = mh / (std::sqrt(vh) + options_.eps) + lambda * wv[i];
      wn += wv[i] * wv[i];
      rn += r[i] * r[i];
    }
    wn = std::sqrt(wn);
    rn = std::sqrt(rn);
    s.phi = (options_.unit_trust_ratio || wn == 0 || rn == 0) ? 1.0 : wn / rn;
    dispatch_dtype(w.dtype(), [&]<typename T>() {
      auto d = w.template data<T>();
      for (size_t i = 0; i < r.size(); ++i) d[i] = static_cast<T>(wv[i] - lr * s.phi * r[i]);
    });
  }
}

}  // namespace nex
