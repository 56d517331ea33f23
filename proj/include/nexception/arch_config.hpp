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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nexception/layers.hpp"

namespace nex {

enum class PoolKind { kMaxPool, kStridedConv, kBlurPool };
enum class Bottleneck { kOff, kInverted3 };
enum class ActPosition { kAfterExpandOnly, kAfterAllConvs, kPreBlock, kNone };
enum class NormPosition { kAfterFirstConv, kAfterAllConvs, kPreBlock, kPostBlock };

/// One point of the architecture search space. The defaults are the searched
/// configuration shared by every named NEXcepTion variant.
struct ArchConfig {
  int64_t kernel_entry = 5;
  int64_t kernel_middle = 5;
  int64_t kernel_exit = 5;
  StemKind stem = StemKind::kPatchify2x2;
  PoolKind pool = PoolKind::kBlurPool;
  Bottleneck bottleneck = Bottleneck::kInverted3;
  bool se = true;
  ActKind act = ActKind::kGELU;
  ActPosition act_position = ActPosition::kAfterExpandOnly;
  NormKind norm = NormKind::kBatch;
  NormPosition norm_position = NormPosition::kAfterFirstConv;

  /// Throws ConfigError naming the first field outside its domain.
  void validate() const;
  bool operator==(const ArchConfig&) const = default;

  /// Flat key/value view using the dimension names below.
  std::map<std::string, std::string> to_map() const;
  /// Missing keys keep their default; unknown keys or values throw.
  static ArchConfig from_map(const std::map<std::string, std::string>& kv);
};

/// A named dimension of the search space and its ordered value labels.
struct SearchDimension {
  std::string name;
  std::vector<std::string> values;
};

const std::vector<SearchDimension>& search_dimensions();
/// Product of the domain sizes.
int64_t search_space_cardinality();

/// Per-dimension value indices, in search_dimensions() order.
std::vector<int> encode(const ArchConfig& cfg);
ArchConfig decode(std::span<const int> indices);

}  // namespace nex
