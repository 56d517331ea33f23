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

// Desk-scale trainability runs on the reduced search network. Shared by the
// unit tests and the acceptance run.

#include <cmath>
#include <numeric>

#include "nexception/nas/search.hpp"
#include "nexception/training/augment.hpp"
#include "nexception/training/optim.hpp"
#include "nexception/training/trainer.hpp"

namespace nex::testing {

struct MemorizeResult {
  int64_t steps_to_perfect = -1;  // first step whose forward pass fits all samples
  double final_loss = 0;
  double final_accuracy = 0;
};

/// Fits 8 fixed synthetic samples with LAMB and BCE, no augmentation. Train
/// accuracy is read off the training-mode forward pass of each step.
inline MemorizeResult memorize(int64_t max_steps = 50, uint64_t seed = 0, int64_t width = 16) {
  Dataset d = synthetic_dataset({10, 1, 32, 40.0, seed, "train"});
  std::vector<size_t> idx(8);
  std::iota(idx.begin(), idx.end(), 0);
  d = d.subset(idx);
  ModelOptions mo;
  mo.num_classes = 10;
  mo.seed = seed;
  mo.nas_width = width;
  auto m = build_variant("reduced_nas", mo);
  Lamb opt(m->parameters());
  std::vector<Image> imgs;
  for (size_t i = 0; i < d.size(); ++i) imgs.push_back(d.image(i));
  const Tensor x = to_tensor(imgs, d.mean, d.std);
  const Tensor t = one_hot(d.labels, 10);
  MemorizeResult r;
  for (int64_t step = 0; step < max_steps; ++step) {
    m->zero_grad();
    ForwardContext ctx;
    ctx.training = true;
    const Tensor logits = m->forward(x, ctx);
    const Tensor loss = bce_with_logits(logits, t);
    int64_t hits = 0;
    const auto z = logits.to_vector();
    for (size_t i = 0; i < d.size(); ++i) {
      hits += in_top_k(std::span(z).subspan(i * 10, 10), d.labels[i], 1);
    }
    r.final_loss = loss.item();
    r.final_accuracy = double(hits) / double(d.size());
    if (hits == int64_t(d.size())) {
      r.steps_to_perfect = step;
      break;
    }
    backward(loss);
    opt.step(5e-3, 0.0);
  }
  return r;
}

struct SyntheticRunResult {
  double val_top1 = 0;
  double chance = 0, sigma = 0;
  int64_t val_size = 0;
  int64_t epochs = 0;
  int64_t first_above = -1;  // first epoch whose accuracy clears threshold()
  double threshold() const { return chance + 3 * sigma; }
};

/// Trains the reduced network on 10-class synthetic data and scores a
/// held-out split against the binomial spread of chance accuracy.
inline SyntheticRunResult synthetic_run(int64_t epochs, int64_t per_class = 50, uint64_t seed = 0) {
  const Dataset all = synthetic_dataset({10, per_class, 32, 40.0, seed, "train"});
  const auto [train, val] = split_dataset(all, 0.2, seed);
  TrainConfig cfg = nas_train_defaults();
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.warmup_epochs = std::min(cfg.warmup_epochs, double(epochs - 1));
  ModelOptions mo;
  mo.num_classes = 10;
  mo.seed = seed;
  auto m = build_variant("reduced_nas", mo);
  const TrainResult tr = train_epochs(*m, train, &val, cfg);
  SyntheticRunResult r;
  r.val_top1 = tr.history.back().val_top1;
  r.val_size = int64_t(val.size());
  r.chance = 0.1;
  r.sigma = std::sqrt(r.chance * (1 - r.chance) / double(r.val_size));
  r.epochs = epochs;
  for (const auto& e : tr.history) {
    if (e.val_top1 > r.threshold()) {
      r.first_above = e.epoch;
      break;
    }
  }
  return r;
}

}  // namespace nex::testing
