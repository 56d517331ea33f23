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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nexception/arch_config.hpp"
#include "nexception/layers.hpp"

namespace nex {

/// Residual block: sepconv C->E, sepconv E->C, sepconv C->C, optional SE, with
/// norm/activation placement from the config. E = 3C with the inverted
/// bottleneck, C otherwise. Output is x + stochastic_depth(branch).
class NexceptionBlock final : public Module {
 public:
  static constexpr int64_t kExpansion = 3;
  NexceptionBlock(std::string name, int64_t channels, int64_t kernel, const ArchConfig& cfg, double drop_p,
                  InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;
  Tensor branch(const Tensor& x, ForwardContext& ctx);
  int64_t expanded_channels() const { return expanded_; }
  SEModule* se() { return se_; }

 private:
  int64_t channels_, expanded_;
  double drop_p_;
  Sequential* body_;
  SEModule* se_ = nullptr;
};

/// Two separable convs, a stride-2 pool and optional SE, summed with a 1x1
/// stride-2 projection shortcut (plus norm). When `widen_first` the first
/// conv maps in->out, otherwise the second one does.
class DownsampleBlock final : public Module {
 public:
  DownsampleBlock(std::string name, int64_t in, int64_t out, int64_t kernel, const ArchConfig& cfg, bool widen_first,
                  InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;
  Tensor shortcut(const Tensor& x, ForwardContext& ctx);
  SEModule* se() { return se_; }

 private:
  int64_t in_, out_;
  Sequential* body_;
  SEModule* se_ = nullptr;
  Sequential* skip_;
};

/// Between-stage downsampling of the pyramid variant: norm then 2x2 stride-2 conv.
class PatchMerge final : public Module {
 public:
  PatchMerge(std::string name, int64_t in, int64_t out, InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;

 private:
  Sequential* body_;
};

/// Global average pooling, optional channel norm, fully connected classifier.
class ClassifierHead final : public Module {
 public:
  ClassifierHead(std::string name, int64_t channels, int64_t classes, bool pre_norm, InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;

 private:
  Module* norm_ = nullptr;
  Linear* fc_;
};

struct ModelOptions {
  int64_t num_classes = 1000;
  int64_t input_hw = 0;  // 0 selects the variant's native resolution
  DType dtype = DType::kFloat32;
  uint64_t seed = 0;
  double drop_path = 0.0;
  int64_t nas_width = 16;  // base width of the reduced search network
};

struct Stage {
  std::string name;
  Module* module;
  Shape expected;  // [C, H, W] or [classes] at the native resolution
};

/// An executable network: ordered stages plus the parameter registry.
class ModelGraph {
 public:
  ModelGraph(std::string arch, std::optional<ArchConfig> config, ModelOptions options);

  const std::string& arch() const { return arch_; }
  const std::optional<ArchConfig>& config() const { return config_; }
  const ModelOptions& options() const { return options_; }
  int64_t input_hw() const { return options_.input_hw; }
  const std::vector<Stage>& stages() const { return stages_; }

  /// Runs every stage, checking each output against the recorded expectation
  /// when the input is at native resolution.
  Tensor forward(const Tensor& x, ForwardContext& ctx);
  Shape infer(const Shape& chw, CostLedger* ledger) const;

  std::vector<Parameter*> parameters();
  Parameter* find(const std::string& name);
  /// Clears all gradients.
  void zero_grad();

  /// Appends a stage; called by the builders. Seals expectations on finalize().
  void add_stage(const std::string& name, std::unique_ptr<Module> module);
  void finalize();

 private:
  std::string arch_;
  std::optional<ArchConfig> config_;
  ModelOptions options_;
  std::vector<std::unique_ptr<Module>> owned_;
  std::vector<Stage> stages_;
};

/// Known names: nexception_t, nexception_s, nexception_tp, xception, reduced_nas.
const std::vector<std::string>& variant_names();

/// Builds a named variant. reduced_nas uses `config` (defaults when null); the
/// other variants ignore it.
std::unique_ptr<ModelGraph> build_variant(const std::string& name, ModelOptions options = {},
                                          const ArchConfig* config = nullptr);

/// The configuration every full-size NEXcepTion variant uses.
ArchConfig nexception_defaults();
/// The Xception baseline expressed in the same vocabulary.
ArchConfig xception_config();

}  // namespace nex
