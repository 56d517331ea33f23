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

#include <array>
#include <deque>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nexception/ops.hpp"
#include "nexception/tensor.hpp"

namespace nex {

/// One row of a cost ledger: a leaf layer, its output shape [C, H, W], its
/// trainable parameter count and its multiply-accumulate count.
struct LayerCost {
  std::string name;
  std::string kind;
  Shape output;
  int64_t params = 0;
  int64_t macs = 0;
};

using CostLedger = std::vector<LayerCost>;

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required when training with stochastic depth
  // When set, stages and blocks append (name, output shape).
  std::vector<std::pair<std::string, Shape>>* trace = nullptr;
};

struct InitContext {
  Rng& rng;
  DType dtype = DType::kFloat32;
};

class Module {
 public:
  explicit Module(std::string name) : name_(std::move(name)) {}
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  virtual Tensor forward(const Tensor& x, ForwardContext& ctx) = 0;
  /// Static shape propagation over a [C, H, W] input; leaf layers append
  /// their cost to `ledger` when it is non-null.
  virtual Shape infer(const Shape& chw, CostLedger* ledger) const = 0;

  const std::string& name() const { return name_; }
  /// Parameters of this module and all descendants, in registration order.
  void collect(std::vector<Parameter*>& out);
  int64_t trainable_count() const;

 protected:
  Tensor& add_parameter(const std::string& leaf, Tensor value, bool trainable = true, bool decay_exempt = false);
  template <typename M>
  M* adopt(std::unique_ptr<M> child) {
    M* raw = child.get();
    children_.push_back(std::move(child));
    return raw;
  }
  int64_t own_trainable() const;
  void log(CostLedger* ledger, const char* kind, const Shape& out, int64_t macs) const;

 private:
  std::string name_;
  std::deque<Parameter> params_;
  std::vector<std::unique_ptr<Module>> children_;
};

std::string join_name(const std::string& prefix, const std::string& leaf);

class Conv2d final : public Module {
 public:
  Conv2d(std::string name, int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding,
         int64_t groups, bool bias, InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  int64_t in_channels() const { return in_; }
  int64_t out_channels() const { return out_; }

 private:
  int64_t in_, out_, kernel_;
  Conv2dOptions opt_;
  Tensor weight_, bias_;
};

class Linear final : public Module {
 public:
  Linear(std::string name, int64_t in, int64_t out, bool bias, InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  int64_t in_, out_;
  Tensor weight_, bias_;
};

enum class NormKind { kBatch, kLayer };

class BatchNorm2d final : public Module {
 public:
  BatchNorm2d(std::string name, int64_t channels, InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;
  BatchNormState& state() { return state_; }

 private:
  int64_t channels_;
  BatchNormState state_;
};

/// Channel-wise layer normalisation at every spatial position.
class LayerNorm2d final : public Module {
 public:
  LayerNorm2d(std::string name, int64_t channels, InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;

 private:
  int64_t channels_;
  Tensor weight_, bias_;
};

std::unique_ptr<Module> make_norm(NormKind kind, std::string name, int64_t channels, InitContext& init);

class Activation final : public Module {
 public:
  Activation(std::string name, ActKind kind) : Module(std::move(name)), kind_(kind) {}
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;

 private:
  ActKind kind_;
};

class Sequential final : public Module {
 public:
  explicit Sequential(std::string name) : Module(std::move(name)) {}
  template <typename M>
  M* push(std::unique_ptr<M> m) {
    M* raw = adopt(std::move(m));
    layers_.push_back(raw);
    return raw;
  }
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;
  size_t size() const { return layers_.size(); }
  Module& at(size_t i) { return *layers_.at(i); }
  // Stages are traced block by block.
  bool trace_children = false;

 private:
  std::vector<Module*> layers_;
};

/// Depthwise k x k (groups = in, no bias, padding (k-1)/2) followed by a 1 x 1
/// pointwise projection.
class SeparableConv final : public Module {
 public:
  SeparableConv(std::string name, int64_t in, int64_t out, int64_t kernel, int64_t stride, bool pointwise_bias,
                InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;
  Conv2d& depthwise() { return *dw_; }
  Conv2d& pointwise() { return *pw_; }
  /// in * k^2 + in * out (+ out with bias).
  static int64_t param_count(int64_t in, int64_t out, int64_t kernel, bool bias);

 private:
  int64_t in_;
  Conv2d* dw_;
  Conv2d* pw_;
};

/// Squeeze-and-excitation: sigmoid(W2 relu(W1 gap(x))) rescales each channel.
class SEModule final : public Module {
 public:
  static constexpr int64_t kDefaultReduction = 16;
  SEModule(std::string name, int64_t channels, InitContext& init, int64_t reduction = kDefaultReduction);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;
  /// Forces the gate to 1 (test hook).
  void set_bypass(bool on) { bypass_ = on; }
  Linear& reduce() { return *fc1_; }
  Linear& expand() { return *fc2_; }
  int64_t hidden() const { return hidden_; }

 private:
  int64_t channels_, hidden_;
  Linear* fc1_;
  Linear* fc2_;
  bool bypass_ = false;
};

/// Normalised 3 x 3 binomial filter, outer([1, 2, 1]) / 16.
std::array<double, 9> blur_kernel();

class MaxPool final : public Module {
 public:
  MaxPool(std::string name, int64_t kernel, int64_t stride, int64_t padding)
      : Module(std::move(name)), kernel_(kernel), stride_(stride), padding_(padding) {}
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;

 private:
  int64_t kernel_, stride_, padding_;
};

/// 3 x 3 max pool at stride 1 followed by the fixed binomial blur at stride 2.
class MaxBlurPool final : public Module {
 public:
  MaxBlurPool(std::string name, int64_t channels, DType dtype);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;

 private:
  int64_t channels_;
  Tensor blur_;  // [C, 1, 3, 3], constant
};

Tensor max_blur_pool(const Tensor& x);

enum class StemKind { kConv, kPatchify2x2 };

/// Non-overlapping k x k convolution at stride k (with bias) and a norm.
class PatchifyStem final : public Module {
 public:
  PatchifyStem(std::string name, int64_t in, int64_t out, int64_t patch, NormKind norm, InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;

 private:
  int64_t patch_;
  Conv2d* conv_;
  Module* norm_;
};

/// conv 3x3 s2 -> norm -> act -> conv 3x3 s1 -> norm -> act.
class ConvStem final : public Module {
 public:
  ConvStem(std::string name, int64_t in, int64_t mid, int64_t out, NormKind norm, ActKind act, InitContext& init);
  Tensor forward(const Tensor& x, ForwardContext& ctx) override;
  Shape infer(const Shape& chw, CostLedger* ledger) const override;

 private:
  Sequential* body_;
};

std::unique_ptr<Module> make_stem(StemKind kind, const std::string& name, int64_t out_channels, NormKind norm,
                                  ActKind act, InitContext& init);

/// Training: each sample's branch is zeroed with probability p, otherwise
/// divided by 1 - p. Eval: identity.
Tensor stochastic_depth(const Tensor& branch, double p, bool training, Rng* rng);

}  // namespace nex
