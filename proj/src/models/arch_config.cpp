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
#include "nexception/arch_config.hpp"

#include <algorithm>

namespace nex {

namespace {

enum Dim {
  kKernelEntry,
  kKernelMiddle,
  kKernelExit,
  kStem,
  kPool,
  kBottleneck,
  kSe,
  kAct,
  kActPosition,
  kNorm,
  kNormPosition,
};

const std::vector<std::string> kKernels = {"3", "5", "7", "9"};

int index_of(const SearchDimension& d, const std::string& value) {
  auto it = std::find(d.values.begin(), d.values.end(), value);
  if (it == d.values.end()) {
    std::string allowed;
    for (const auto& v : d.values) allowed += (allowed.empty() ? "" : ", ") + v;
    throw ConfigError("invalid value '" + value + "' for " + d.name + " (allowed: " + allowed + ")");
  }
  return static_cast<int>(it - d.values.begin());
}

}  // namespace

const std::vector<SearchDimension>& search_dimensions() {
  static const std::vector<SearchDimension> dims = {
      {"kernel_entry", kKernels},
      {"kernel_middle", kKernels},
      {"kernel_exit", kKernels},
      {"stem", {"conv_stem", "patchify2x2"}},
      {"pool", {"max_pool", "strided_conv", "blur_pool"}},
      {"bottleneck", {"off", "inverted3"}},
      {"se", {"off", "on"}},
      {"act_kind", {"relu", "gelu", "elu", "celu"}},
      {"act_position", {"after_expand_only", "after_all_convs", "pre_block", "none"}},
      {"norm_kind", {"batch", "layer"}},
      {"norm_position", {"after_first_conv", "after_all_convs", "pre_block", "post_block"}},
  };
  return dims;
}

int64_t search_space_cardinality() {
  int64_t n = 1;
  for (const auto& d : search_dimensions()) n *= static_cast<int64_t>(d.values.size());
  return n;
}

std::vector<int> encode(const ArchConfig& cfg) {
  cfg.validate();
  const auto& dims = search_dimensions();
  return {
      index_of(dims[kKernelEntry], std::to_string(cfg.kernel_entry)),
      index_of(dims[kKernelMiddle], std::to_string(cfg.kernel_middle)),
      index_of(dims[kKernelExit], std::to_string(cfg.kernel_exit)),
      static_cast<int>(cfg.stem),
      static_cast<int>(cfg.pool),
      static_cast<int>(cfg.bottleneck),
      cfg.se ? 1 : 0,
      static_cast<int>(cfg.act),
      static_cast<int>(cfg.act_position),
      static_cast<int>(cfg.norm),
      static_cast<int>(cfg.norm_position),
  };
}

ArchConfig decode(std::span<const int> idx) {
  const auto& dims = search_dimensions();
  if (idx.size() != dims.size()) {
    throw ConfigError("decode: expected " + std::to_string(dims.size()) + " indices, got " +
                      std::to_string(idx.size()));
  }
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= static_cast<int>(dims[i].values.size())) {
      throw ConfigError("decode: index " + std::to_string(idx[i]) + " out of range for " + dims[i].name);
    }
  }
  ArchConfig c;
  c.kernel_entry = 3 + 2 * idx[kKernelEntry];
  c.kernel_middle = 3 + 2 * idx[kKernelMiddle];
  c.kernel_exit = 3 + 2 * idx[kKernelExit];
  c.stem = static_cast<StemKind>(idx[kStem]);
  c.pool = static_cast<PoolKind>(idx[kPool]);
  c.bottleneck = static_cast<Bottleneck>(idx[kBottleneck]);
  c.se = idx[kSe] == 1;
  c.act = static_cast<ActKind>(idx[kAct]);
  c.act_position = static_cast<ActPosition>(idx[kActPosition]);
  c.norm = static_cast<NormKind>(idx[kNorm]);
  c.norm_position = static_cast<NormPosition>(idx[kNormPosition]);
  return c;
}

void ArchConfig::validate() const {
  for (auto [name, k] : {std::pair{"kernel_entry", kernel_entry}, std::pair{"kernel_middle", kernel_middle},
                         std::pair{"kernel_exit", kernel_exit}}) {
    if (k != 3 && k != 5 && k != 7 && k != 9) {
      throw ConfigError(std::string(name) + " must be one of 3, 5, 7, 9; got " + std::to_string(k));
    }
  }
  auto in_range = [](auto v, int n) { return static_cast<int>(v) >= 0 && static_cast<int>(v) < n; };
  if (!in_range(stem, 2)) throw ConfigError("stem out of domain");
  if (!in_range(pool, 3)) throw ConfigError("pool out of domain");
  if (!in_range(bottleneck, 2)) throw ConfigError("bottleneck out of domain");
  if (!in_range(act, 4)) throw ConfigError("act_kind out of domain");
  if (!in_range(act_position, 4)) throw ConfigError("act_position out of domain");
  if (!in_range(norm, 2)) throw ConfigError("norm_kind out of domain");
  if (!in_range(norm_position, 4)) throw ConfigError("norm_position out of domain");
}

std::map<std::string, std::string> ArchConfig::to_map() const {
  const auto& dims = search_dimensions();
  const auto idx = encode(*this);
  std::map<std::string, std::string> kv;
  for (size_t i = 0; i < dims.size(); ++i) kv[dims[i].name] = dims[i].values[static_cast<size_t>(idx[i])];
  return kv;
}

ArchConfig ArchConfig::from_map(const std::map<std::string, std::string>& kv) {
  const auto& dims = search_dimensions();
  auto idx = encode(ArchConfig{});
  for (const auto& [key, value] : kv) {
    auto it = std::find_if(dims.begin(), dims.end(), [&](const SearchDimension& d) { return d.name == key; });
    if (it == dims.end()) throw ConfigError("unknown architecture key '" + key + "'");
    idx[static_cast<size_t>(it - dims.begin())] = index_of(*it, value);
  }
  return decode(idx);
}

}  // namespace nex
