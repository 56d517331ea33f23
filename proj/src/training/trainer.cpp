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

#include "nexception/training/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "nexception/io/checkpoint.hpp"
#include "nexception/ops.hpp"
#include "nexception/training/augment.hpp"
#include "nexception/training/optim.hpp"

namespace nex {

namespace {

constexpr uint64_t kAll = ~uint64_t{0};

Tensor loss_of(const Tensor& logits, const Tensor& targets, LossKind kind) {
  return kind == LossKind::kBCE ? bce_with_logits(logits, targets) : soft_cross_entropy(logits, targets);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index owns its
// output slot, so the result never depends on the split.
template <typename Fn>
void parallel_for(int64_t n, int64_t workers, Fn&& fn) {
  const int64_t k = std::clamp<int64_t>(workers, 1, std::max<int64_t>(1, n));
  if (k == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  for (int64_t t = 0; t < k; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int64_t i = t; i < n; i += k) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

void write_summary(const std::filesystem::path& dir, const ModelGraph& model, const TrainConfig& cfg,
                   const TrainResult& r, bool wall_clock) {
  nlohmann::ordered_json j;
  j["model"] = model.arch();
  if (model.config()) j["arch_config"] = model.config()->to_map();
  j["train_config"] = cfg.to_map();
  j["epochs"] = r.history.size();
  j["steps"] = r.steps;
  j["best_top1"] = r.best_top1;
  j["best_epoch"] = r.best_epoch;
  if (!r.history.empty()) {
    const auto& last = r.history.back();
    j["final"] = {{"epoch", last.epoch}, {"lr", last.lr}, {"train_loss", last.train_loss}, {"val_loss", last.val_loss},
                  {"val_top1", last.val_top1}, {"val_top5", last.val_top5}};
  }
  if (wall_clock) {
    double total = 0;
    for (const auto& m : r.history) total += m.seconds;
    j["seconds"] = total;
  }
  std::ofstream(dir / "summary.json") << j.dump(2) << '\n';
}

}  // namespace

bool in_top_k(std::span<const double> logits, int64_t label, int64_t k) {
  const double target = logits[static_cast<size_t>(label)];
  int64_t ahead = 0;
  for (size_t c = 0; c < logits.size(); ++c) {
    const double v = logits[c];
    if (v > target || (v == target && static_cast<int64_t>(c) < label)) ++ahead;
  }
  return ahead < k;
}

EvalResult evaluate(ModelGraph& model, const Dataset& data, const TrainConfig& cfg, int64_t batch_size) {
  if (data.size() == 0) throw ConfigError("evaluate: empty dataset");
  if (batch_size < 1) throw ConfigError("evaluate: batch_size must be positive");
  const int64_t classes = model.options().num_classes;
  if (data.num_classes > classes) throw ConfigError("evaluate: dataset has more classes than the model head");
  NoGradGuard no_grad;
  ForwardContext ctx;
  EvalResult r;
  double loss_sum = 0;
  int64_t hit1 = 0, hit5 = 0;
  const int64_t n = static_cast<int64_t>(data.size());
  const int64_t k5 = std::min<int64_t>(5, classes);
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t b = std::min(batch_size, n - start);
    std::vector<Image> imgs(static_cast<size_t>(b));
    std::vector<int32_t> labels(static_cast<size_t>(b));
    parallel_for(b, cfg.workers, [&](int64_t i) {
      imgs[static_cast<size_t>(i)] =
          eval_transform(data.image(static_cast<size_t>(start + i)), model.input_hw(), cfg.test_crop_ratio);
      labels[static_cast<size_t>(i)] = data.labels[static_cast<size_t>(start + i)];
    });
    const DType dtype = model.options().dtype;
    Tensor x = to_tensor(imgs, data.mean, data.std, dtype);
    Tensor logits = model.forward(x, ctx);
    loss_sum += loss_of(logits, one_hot(labels, classes, 0.0, dtype), cfg.loss).item() * static_cast<double>(b);
    const std::vector<double> z = logits.to_vector();
    for (int64_t i = 0; i < b; ++i) {
      std::span<const double> row(z.data() + i * classes, static_cast<size_t>(classes));
      hit1 += in_top_k(row, labels[static_cast<size_t>(i)], 1);
      hit5 += in_top_k(row, labels[static_cast<size_t>(i)], k5);
    }
  }
  r.count = n;
  r.top1 = static_cast<double>(hit1) / static_cast<double>(n);
  r.top5 = static_cast<double>(hit5) / static_cast<double>(n);
  r.loss = loss_sum / static_cast<double>(n);
  return r;
}

TrainResult train_epochs(ModelGraph& model, const Dataset& train, const Dataset* val, const TrainConfig& cfg,
                         const TrainOptions& options) {
  cfg.validate();
  train.validate();
  if (train.size() == 0) throw ConfigError("train_epochs: empty training set");
  const int64_t classes = model.options().num_classes;
  if (train.num_classes > classes) throw ConfigError("train_epochs: dataset has more classes than the model head");
  if (val) val->validate();
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  const int64_t n = static_cast<int64_t>(train.size());
  const int64_t batch = std::min(cfg.batch_size, n);
  const int64_t per_epoch = n / batch;
  const int64_t hw = model.input_hw();
  const DType dtype = model.options().dtype;
  const RandAugmentOptions ra{cfg.randaugment_magnitude, cfg.randaugment_std, cfg.randaugment_ops};
  const bool use_mixup = cfg.mixup_alpha > 0, use_cutmix = cfg.cutmix_alpha > 0;

  Lamb optimizer(model.parameters());
  TrainResult result;
  std::vector<size_t> order(train.size());

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(sample_seed(cfg.seed, static_cast<uint64_t>(epoch), kAll, kAll));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    double epoch_lr = 0;

    for (int64_t b = 0; b < per_epoch; ++b) {
      const int64_t step = epoch * per_epoch + b;
      const double lr =
          cosine_warmup_lr(static_cast<double>(epoch) + static_cast<double>(b) / static_cast<double>(per_epoch), cfg);
      if (b == 0) epoch_lr = lr;

      std::vector<Image> imgs(static_cast<size_t>(batch));
      std::vector<int32_t> labels(static_cast<size_t>(batch));
      parallel_for(batch, cfg.workers, [&](int64_t i) {
        const size_t idx = order[static_cast<size_t>(b * batch + i)];
        Rng rng(sample_seed(cfg.seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(b), static_cast<uint64_t>(i)));
        Image img = train.image(idx);
        if (img.height != hw || img.width != hw) img = resize_bilinear(img, hw, hw);
        if (cfg.randaugment && cfg.randaugment_ops > 0) img = rand_augment(img, ra, rng);
        if (cfg.random_erasing > 0) img = random_erasing(img, cfg.random_erasing, rng);
        imgs[static_cast<size_t>(i)] = std::move(img);
        labels[static_cast<size_t>(i)] = train.labels[idx];
      });

      Rng batch_rng(sample_seed(cfg.seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(b), kAll));
      Tensor x = to_tensor(imgs, train.mean, train.std, dtype);
      Tensor y = one_hot(labels, classes, cfg.label_smoothing, dtype);
      if (use_mixup || use_cutmix) {
        bool pick_cutmix = use_cutmix;
        if (use_mixup && use_cutmix) pick_cutmix = std::bernoulli_distribution(0.5)(batch_rng);
        MixResult mixed = pick_cutmix ? cutmix(x, y, cfg.cutmix_alpha, batch_rng) : mixup(x, y, cfg.mixup_alpha, batch_rng);
        x = mixed.x;
        y = mixed.targets;
      }

      double loss_value = 0;
      try {
        ForwardContext ctx{true, &batch_rng, nullptr};
        Tensor logits = model.forward(x, ctx);
        Tensor loss = loss_of(logits, y, cfg.loss);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) throw NumericError("loss is not finite");
        model.zero_grad();
        backward(loss);
        optimizer.step(lr, cfg.weight_decay);
      } catch (const NumericError& e) {
        throw DivergenceError(step, e.what());
      }
      loss_sum += loss_value;
      result.step_lr.push_back(lr);
      result.step_loss.push_back(loss_value);
      ++result.steps;
    }

    EpochMetrics m;
    m.epoch = epoch + 1;
    m.lr = epoch_lr;
    m.train_loss = loss_sum / static_cast<double>(per_epoch);
    bool improved = epoch + 1 == cfg.epochs && val == nullptr;
    if (val) {
      const EvalResult ev = evaluate(model, *val, cfg);
      m.val_loss = ev.loss;
      m.val_top1 = ev.top1;
      m.val_top5 = ev.top5;
      improved = result.best_epoch < 0 || ev.top1 > result.best_top1;
    }
    if (improved) {
      result.best_top1 = m.val_top1;
      result.best_epoch = m.epoch;
      if (!options.out_dir.empty()) {
        save_checkpoint(model, options.out_dir / "best.ckpt", {{"epoch", m.epoch}, {"val_top1", m.val_top1}});
      }
    }
    if (options.wall_clock) m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(m);
    if (!options.out_dir.empty()) write_metrics_csv(options.out_dir / "metrics.csv", result.history);
    if (options.on_epoch) options.on_epoch(m);
  }
  if (!options.out_dir.empty()) write_summary(options.out_dir, model, cfg, result, options.wall_clock);
  return result;
}

}  // namespace nex
