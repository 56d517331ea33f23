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

#include <string>
#include <vector>

#include "nexception/model.hpp"

namespace nex {

/// Per-layer and total cost of a model at one input resolution. FLOPs are
/// multiply-accumulates (one fused multiply-add counts once); norms,
/// activations and pools count as zero.
struct CostReport {
  std::string arch;
  int64_t input_hw = 0;
  std::vector<LayerCost> layers;
  Shape output;
  int64_t total_params = 0;
  int64_t total_flops = 0;
};

/// Walks the graph at `input_hw` (0 = native resolution) and fills both
/// parameter and FLOP columns.
CostReport count_cost(const ModelGraph& model, int64_t input_hw = 0);
CostReport count_params(const ModelGraph& model);
CostReport count_flops(const ModelGraph& model, int64_t input_hw);

/// Aligned text table: name, kind, output shape, params, FLOPs, then totals.
std::string format_cost_table(const CostReport& report);
/// Machine-readable form of the same report.
std::string cost_to_json(const CostReport& report, bool include_layers = true);

}  // namespace nex
