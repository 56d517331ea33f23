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

#include "nexception/cost.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace nex {

CostReport count_cost(const ModelGraph& model, int64_t input_hw) {
  CostReport r;
  r.arch = model.arch();
  r.input_hw = input_hw > 0 ? input_hw : model.input_hw();
  r.output = model.infer({3, r.input_hw, r.input_hw}, &r.layers);
  for (const auto& l : r.layers) {
    r.total_params += l.params;
    r.total_flops += l.macs;
  }
  return r;
}

CostReport count_params(const ModelGraph& model) { return count_cost(model, 0); }

CostReport count_flops(const ModelGraph& model, int64_t input_hw) { return count_cost(model, input_hw); }

namespace {

std::string grouped(int64_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > (s[0] == '-' ? 1 : 0); i -= 3) s.insert(static_cast<size_t>(i), ",");
  return s;
}

std::string shape_chw(const Shape& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

}  // namespace

std::string format_cost_table(const CostReport& r) {
  size_t wn = 5, wk = 4, ws = 5;
  for (const auto& l : r.layers) {
    wn = std::max(wn, l.name.size());
    wk = std::max(wk, l.kind.size());
    ws = std::max(ws, shape_chw(l.output).size());
  }
  std::ostringstream os;
  char line[512];
  auto row = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                 const std::string& e) {
    std::snprintf(line, sizeof line, "%-*s  %-*s  %-*s  %14s  %16s\n", static_cast<int>(wn), a.c_str(),
                  static_cast<int>(wk), b.c_str(), static_cast<int>(ws), c.c_str(), d.c_str(), e.c_str());
    os << line;
  };
  row("layer", "kind", "shape", "params", "flops");
  for (const auto& l : r.layers) row(l.name, l.kind, shape_chw(l.output), grouped(l.params), grouped(l.macs));
  os << "\n";
  std::snprintf(line, sizeof line, "model %s  input %lldx%lld  output %s\n", r.arch.c_str(),
                static_cast<long long>(r.input_hw), static_cast<long long>(r.input_hw), shape_chw(r.output).c_str());
  os << line;
  std::snprintf(line, sizeof line, "total params %s (%.2fM)\ntotal flops  %s (%.2fG)\n", grouped(r.total_params).c_str(),
                static_cast<double>(r.total_params) / 1e6, grouped(r.total_flops).c_str(),
                static_cast<double>(r.total_flops) / 1e9);
  os << line;
  return os.str();
}

std::string cost_to_json(const CostReport& r, bool include_layers) {
  nlohmann::ordered_json j;
  j["model"] = r.arch;
  j["input_hw"] = r.input_hw;
  j["output"] = r.output;
  j["total_params"] = r.total_params;
  j["total_flops"] = r.total_flops;
  if (include_layers) {
    auto& layers = j["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : r.layers) {
      layers.push_back({{"name", l.name}, {"kind", l.kind}, {"shape", l.output}, {"params", l.params},
                        {"flops", l.macs}});
    }
  }
  return j.dump(2);
}

}  // namespace nex
