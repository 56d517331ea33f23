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

#include "nexception/training/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "nexception/tensor.hpp"

namespace nex {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& key, const std::string& s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError(key + ": not a number: '" + s + "'");
  return v;
}

int64_t to_int(const std::string& key, const std::string& s) {
  int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError(key + ": not an integer: '" + s + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "on") return true;
  if (s == "false" || s == "0" || s == "off") return false;
  throw ConfigError(key + ": not a boolean: '" + s + "'");
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define NEX_DOUBLE(name) \
  Field{#name, [](const TrainConfig& c) { return fmt_double(c.name); }, \
        [](TrainConfig& c, const std::string& s) { c.name = to_double(#name, s); }}
#define NEX_INT(name) \
  Field{#name, [](const TrainConfig& c) { return std::to_string(c.name); }, \
        [](TrainConfig& c, const std::string& s) { c.name = to_int(#name, s); }}
#define NEX_BOOL(name) \
  Field{#name, [](const TrainConfig& c) { return std::string(c.name ? "true" : "false"); }, \
        [](TrainConfig& c, const std::string& s) { c.name = to_bool(#name, s); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      NEX_DOUBLE(learning_rate),
      NEX_DOUBLE(weight_decay),
      NEX_INT(batch_size),
      NEX_INT(epochs),
      NEX_DOUBLE(warmup_epochs),
      NEX_DOUBLE(min_lr),
      NEX_BOOL(randaugment),
      NEX_DOUBLE(randaugment_magnitude),
      NEX_DOUBLE(randaugment_std),
      NEX_INT(randaugment_ops),
      NEX_DOUBLE(mixup_alpha),
      NEX_DOUBLE(cutmix_alpha),
      NEX_DOUBLE(random_erasing),
      NEX_DOUBLE(label_smoothing),
      NEX_DOUBLE(stoch_depth),
      Field{"loss", [](const TrainConfig& c) { return std::string(c.loss == LossKind::kBCE ? "bce" : "ce"); },
            [](TrainConfig& c, const std::string& s) {
              if (s == "bce") c.loss = LossKind::kBCE;
              else if (s == "ce") c.loss = LossKind::kCE;
              else throw ConfigError("loss: expected bce or ce, got '" + s + "'");
            }},
      NEX_DOUBLE(test_crop_ratio),
      Field{"seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
            [](TrainConfig& c, const std::string& s) { c.seed = static_cast<uint64_t>(to_int("seed", s)); }},
      NEX_INT(workers),
  };
  return f;
}

#undef NEX_DOUBLE
#undef NEX_INT
#undef NEX_BOOL

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool prob(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void TrainConfig::validate() const {
  require(std::isfinite(learning_rate) && learning_rate > 0, "learning_rate must be positive");
  require(std::isfinite(min_lr) && min_lr >= 0 && min_lr <= learning_rate, "min_lr must be in [0, learning_rate]");
  require(std::isfinite(weight_decay) && weight_decay >= 0, "weight_decay must be non-negative");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(epochs >= 1, "epochs must be at least 1");
  require(warmup_epochs >= 0 && warmup_epochs < static_cast<double>(epochs), "warmup_epochs must be in [0, epochs)");
  require(randaugment_magnitude >= 0 && randaugment_magnitude <= 10, "randaugment_magnitude must be in [0, 10]");
  require(randaugment_std >= 0, "randaugment_std must be non-negative");
  require(randaugment_ops >= 0, "randaugment_ops must be non-negative");
  require(mixup_alpha >= 0, "mixup_alpha must be non-negative");
  require(cutmix_alpha >= 0, "cutmix_alpha must be non-negative");
  require(prob(random_erasing), "random_erasing must be in [0, 1]");
  require(prob(label_smoothing), "label_smoothing must be in [0, 1]");
  require(stoch_depth >= 0 && stoch_depth < 1, "stoch_depth must be in [0, 1)");
  require(test_crop_ratio > 0 && test_crop_ratio <= 1, "test_crop_ratio must be in (0, 1]");
  require(workers >= 1, "workers must be at least 1");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  std::map<std::string, std::string> kv;
  for (const auto& f : fields()) kv[f.key] = f.get(*this);
  return kv;
}

void TrainConfig::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    bool found = false;
    for (const auto& f : fields()) {
      if (k == f.key) {
        f.set(*this, v);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown training key '" + k + "'");
  }
}

bool TrainConfig::is_key(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return true;
  }
  return false;
}

TrainConfig train_defaults(const std::string& variant) {
  TrainConfig c;
  if (variant == "nexception_s") {
    c.learning_rate = 1.4e-3;
    c.batch_size = 128;
  }
  return c;
}

}  // namespace nex
