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
#include "nexception/layers.hpp"

#include <cmath>

namespace nex {

std::string join_name(const std::string& prefix, const std::string& leaf) {
  if (prefix.empty()) return leaf;
  if (leaf.empty()) return prefix;
  return prefix + "." + leaf;
}

void Module::collect(std::vector<Parameter*>& out) {
  for (auto& p : params_) out.push_back(&p);
  for (auto& c : children_) c->collect(out);
}

int64_t Module::own_trainable() const {
  int64_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.numel();
  }
  return n;
}

int64_t Module::trainable_count() const {
  int64_t n = own_trainable();
  for (const auto& c : children_) n += c->trainable_count();
  return n;
}

Tensor& Module::add_parameter(const std::string& leaf, Tensor value, bool trainable, bool decay_exempt) {
  value.set_requires_grad(trainable);
  params_.push_back(Parameter{join_name(name_, leaf), std::move(value), trainable, decay_exempt});
  return params_.back().value;
}

void Module::log(CostLedger* ledger, const char* kind, const Shape& out, int64_t macs) const {
  if (ledger) ledger->push_back(LayerCost{name_, kind, out, own_trainable(), macs});
}

namespace {

void require_chw(const Shape& chw, const std::string& who) {
  if (chw.size() != 3) throw ConfigError(who + ": expected [C, H, W], got " + shape_str(chw));
}

}  // namespace

// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding,
               int64_t groups, bool bias, InitContext& init)
    : Module(std::move(name)), in_(in), out_(out), kernel_(kernel), opt_{stride, padding, groups} {
  if (groups <= 0 || in % groups != 0 || out % groups != 0) {
    throw ConfigError(this->name() + ": channels in=" + std::to_string(in) + " out=" + std::to_string(out) +
                      " not divisible by groups=" + std::to_string(groups));
  }
  const int64_t fan_in = (in / groups) * kernel * kernel;
  weight_ = add_parameter("weight", Tensor::randn({out, in / groups, kernel, kernel}, init.rng,
                                                  std::sqrt(2.0 / static_cast<double>(fan_in)), init.dtype));
  if (bias) bias_ = add_parameter("bias", Tensor::zeros({out}, init.dtype), true, true);
}

Tensor Conv2d::forward(const Tensor& x, ForwardContext&) {
  if (x.dim(1) != in_) {
    throw ConfigError(name() + ": expected " + std::to_string(in_) + " input channels, got " + shape_str(x.shape()));
  }
  return conv2d(x, weight_, bias_, opt_);
}

Shape Conv2d::infer(const Shape& chw, CostLedger* ledger) const {
  require_chw(chw, name());
  if (chw[0] != in_) {
    throw ConfigError(name() + ": expected " + std::to_string(in_) + " input channels, got " + shape_str(chw));
  }
  const int64_t oh = conv_out_extent(chw[1], kernel_, opt_.stride, opt_.padding);
  const int64_t ow = conv_out_extent(chw[2], kernel_, opt_.stride, opt_.padding);
  Shape out{out_, oh, ow};
  const int64_t macs = oh * ow * out_ * (in_ / opt_.groups) * kernel_ * kernel_;
  log(ledger, opt_.groups == 1 ? "conv2d" : (opt_.groups == in_ ? "dwconv2d" : "gconv2d"), out, macs);
  return out;
}

// ---------------------------------------------------------------------------

Linear::Linear(std::string name, int64_t in, int64_t out, bool bias, InitContext& init)
    : Module(std::move(name)), in_(in), out_(out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = add_parameter("weight", Tensor::uniform({out, in}, init.rng, -bound, bound, init.dtype));
  if (bias) bias_ = add_parameter("bias", Tensor::zeros({out}, init.dtype), true, true);
}

Tensor Linear::forward(const Tensor& x, ForwardContext&) { return linear(x, weight_, bias_); }

Shape Linear::infer(const Shape& chw, CostLedger* ledger) const {
  if (shape_numel(chw) != in_) {
    throw ConfigError(name() + ": expected " + std::to_string(in_) + " features, got " + shape_str(chw));
  }
  Shape out{out_};
  log(ledger, "linear", out, in_ * out_);
  return out;
}

// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(std::string name, int64_t channels, InitContext& init)
    : Module(std::move(name)), channels_(channels) {
  state_.weight = add_parameter("weight", Tensor::full({channels}, 1.0, init.dtype), true, true);
  state_.bias = add_parameter("bias", Tensor::zeros({channels}, init.dtype), true, true);
  state_.running_mean = add_parameter("running_mean", Tensor::zeros({channels}, init.dtype), false, true);
  state_.running_var = add_parameter("running_var", Tensor::full({channels}, 1.0, init.dtype), false, true);
}

Tensor BatchNorm2d::forward(const Tensor& x, ForwardContext& ctx) { return batch_norm(x, state_, ctx.training); }

Shape BatchNorm2d::infer(const Shape& chw, CostLedger* ledger) const {
  require_chw(chw, name());
  if (chw[0] != channels_) throw ConfigError(name() + ": channel mismatch for " + shape_str(chw));
  log(ledger, "batchnorm", chw, 0);
  return chw;
}

LayerNorm2d::LayerNorm2d(std::string name, int64_t channels, InitContext& init)
    : Module(std::move(name)), channels_(channels) {
  weight_ = add_parameter("weight", Tensor::full({channels}, 1.0, init.dtype), true, true);
  bias_ = add_parameter("bias", Tensor::zeros({channels}, init.dtype), true, true);
}

Tensor LayerNorm2d::forward(const Tensor& x, ForwardContext&) { return layer_norm(x, weight_, bias_, 1e-6); }

Shape LayerNorm2d::infer(const Shape& chw, CostLedger* ledger) const {
  require_chw(chw, name());
  if (chw[0] != channels_) throw ConfigError(name() + ": channel mismatch for " + shape_str(chw));
  log(ledger, "layernorm", chw, 0);
  return chw;
}

std::unique_ptr<Module> make_norm(NormKind kind, std::string name, int64_t channels, InitContext& init) {
  if (kind == NormKind::kLayer) return std::make_unique<LayerNorm2d>(std::move(name), channels, init);
  return std::make_unique<BatchNorm2d>(std::move(name), channels, init);
}

Tensor Activation::forward(const Tensor& x, ForwardContext&) { return activation(x, kind_); }

Shape Activation::infer(const Shape& chw, CostLedger* ledger) const {
  log(ledger, act_name(kind_), chw, 0);
  return chw;
}

// ---------------------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x, ForwardContext& ctx) {
  Tensor h = x;
  for (Module* m : layers_) {
    h = m->forward(h, ctx);
    if (trace_children && ctx.trace) ctx.trace->emplace_back(m->name(), Shape(h.shape().begin() + 1, h.shape().end()));
  }
  return h;
}

Shape Sequential::infer(const Shape& chw, CostLedger* ledger) const {
  Shape s = chw;
  for (const Module* m : layers_) s = m->infer(s, ledger);
  return s;
}

// ---------------------------------------------------------------------------

SeparableConv::SeparableConv(std::string name, int64_t in, int64_t out, int64_t kernel, int64_t stride,
                             bool pointwise_bias, InitContext& init)
    : Module(std::move(name)), in_(in) {
  if (kernel % 2 == 0) throw ConfigError(this->name() + ": kernel must be odd, got " + std::to_string(kernel));
  dw_ = adopt(std::make_unique<Conv2d>(join_name(this->name(), "dw"), in, in, kernel, stride, (kernel - 1) / 2, in,
                                       false, init));
  pw_ = adopt(std::make_unique<Conv2d>(join_name(this->name(), "pw"), in, out, 1, 1, 0, 1, pointwise_bias, init));
}

Tensor SeparableConv::forward(const Tensor& x, ForwardContext& ctx) {
  if (x.dim(1) != in_) {
    throw ConfigError(name() + ": expected " + std::to_string(in_) + " channels, got " + shape_str(x.shape()));
  }
  return pw_->forward(dw_->forward(x, ctx), ctx);
}

Shape SeparableConv::infer(const Shape& chw, CostLedger* ledger) const {
  return pw_->infer(dw_->infer(chw, ledger), ledger);
}

int64_t SeparableConv::param_count(int64_t in, int64_t out, int64_t kernel, bool bias) {
  return in * kernel * kernel + in * out + (bias ? out : 0);
}

// ---------------------------------------------------------------------------

SEModule::SEModule(std::string name, int64_t channels, InitContext& init, int64_t reduction)
    : Module(std::move(name)), channels_(channels), hidden_(std::max<int64_t>(1, channels / reduction)) {
  if (reduction <= 0) throw ConfigError(this->name() + ": reduction must be positive");
  fc1_ = adopt(std::make_unique<Linear>(join_name(this->name(), "fc1"), channels, hidden_, true, init));
  fc2_ = adopt(std::make_unique<Linear>(join_name(this->name(), "fc2"), hidden_, channels, true, init));
}

Tensor SEModule::forward(const Tensor& x, ForwardContext& ctx) {
  if (x.rank() != 4 || x.dim(1) != channels_) {
    throw ConfigError(name() + ": expected " + std::to_string(channels_) + " channels, got " + shape_str(x.shape()));
  }
  if (bypass_) return x;
  Tensor s = global_avg_pool(x);
  s = activation(fc1_->forward(s, ctx), ActKind::kReLU);
  s = sigmoid(fc2_->forward(s, ctx));
  return channel_scale(x, s);
}

Shape SEModule::infer(const Shape& chw, CostLedger* ledger) const {
  require_chw(chw, name());
  if (chw[0] != channels_) throw ConfigError(name() + ": channel mismatch for " + shape_str(chw));
  fc1_->infer({channels_}, ledger);
  fc2_->infer({hidden_}, ledger);
  return chw;
}

// ---------------------------------------------------------------------------

std::array<double, 9> blur_kernel() {
  constexpr double taps[3] = {1.0, 2.0, 1.0};
  std::array<double, 9> k{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) k[static_cast<size_t>(i * 3 + j)] = taps[i] * taps[j] / 16.0;
  }
  return k;
}

namespace {

Tensor blur_weights(int64_t channels, DType dtype) {
  const auto k = blur_kernel();
  Tensor w = Tensor::zeros({channels, 1, 3, 3}, dtype);
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t i = 0; i < 9; ++i) w.set(c * 9 + i, k[static_cast<size_t>(i)]);
  }
  return w;
}

}  // namespace

Tensor MaxPool::forward(const Tensor& x, ForwardContext&) { return max_pool2d(x, kernel_, stride_, padding_); }

Shape MaxPool::infer(const Shape& chw, CostLedger* ledger) const {
  require_chw(chw, name());
  Shape out{chw[0], conv_out_extent(chw[1], kernel_, stride_, padding_),
            conv_out_extent(chw[2], kernel_, stride_, padding_)};
  log(ledger, "maxpool", out, 0);
  return out;
}

MaxBlurPool::MaxBlurPool(std::string name, int64_t channels, DType dtype)
    : Module(std::move(name)), channels_(channels), blur_(blur_weights(channels, dtype)) {}

Tensor MaxBlurPool::forward(const Tensor& x, ForwardContext&) {
  if (x.rank() != 4 || x.dim(1) != channels_) {
    throw ConfigError(name() + ": expected " + std::to_string(channels_) + " channels, got " + shape_str(x.shape()));
  }
  return conv2d(max_pool2d(x, 3, 1, 1), blur_, Tensor(), Conv2dOptions{2, 1, channels_});
}

Shape MaxBlurPool::infer(const Shape& chw, CostLedger* ledger) const {
  require_chw(chw, name());
  Shape out{chw[0], conv_out_extent(chw[1], 3, 2, 1), conv_out_extent(chw[2], 3, 2, 1)};
  log(ledger, "maxblurpool", out, 0);
  return out;
}

Tensor max_blur_pool(const Tensor& x) {
  if (x.rank() != 4 || x.dim(2) < 3 || x.dim(3) < 3) {
    throw ConfigError("max_blur_pool: needs rank-4 input with H, W >= 3, got " + shape_str(x.shape()));
  }
  const int64_t c = x.dim(1);
  return conv2d(max_pool2d(x, 3, 1, 1), blur_weights(c, x.dtype()), Tensor(), Conv2dOptions{2, 1, c});
}

// ---------------------------------------------------------------------------

PatchifyStem::PatchifyStem(std::string name, int64_t in, int64_t out, int64_t patch, NormKind norm,
                           InitContext& init)
    : Module(std::move(name)), patch_(patch) {
  conv_ = adopt(std::make_unique<Conv2d>(join_name(this->name(), "conv"), in, out, patch, patch, 0, 1, true, init));
  norm_ = adopt(make_norm(norm, join_name(this->name(), "norm"), out, init));
}

Tensor PatchifyStem::forward(const Tensor& x, ForwardContext& ctx) {
  if (x.rank() != 4 || x.dim(2) % patch_ != 0 || x.dim(3) % patch_ != 0) {
    throw ConfigError(name() + ": input " + shape_str(x.shape()) + " not divisible into " + std::to_string(patch_) +
                      "x" + std::to_string(patch_) + " patches");
  }
  return norm_->forward(conv_->forward(x, ctx), ctx);
}

Shape PatchifyStem::infer(const Shape& chw, CostLedger* ledger) const {
  require_chw(chw, name());
  if (chw[1] % patch_ != 0 || chw[2] % patch_ != 0) {
    throw ConfigError(name() + ": input " + shape_str(chw) + " not divisible into patches of " +
                      std::to_string(patch_));
  }
  return norm_->infer(conv_->infer(chw, ledger), ledger);
}

ConvStem::ConvStem(std::string name, int64_t in, int64_t mid, int64_t out, NormKind norm, ActKind act,
                   InitContext& init)
    : Module(std::move(name)) {
  body_ = adopt(std::make_unique<Sequential>(this->name()));
  body_->push(std::make_unique<Conv2d>(join_name(this->name(), "conv1"), in, mid, 3, 2, 1, 1, false, init));
  body_->push(make_norm(norm, join_name(this->name(), "norm1"), mid, init));
  body_->push(std::make_unique<Activation>(join_name(this->name(), "act1"), act));
  body_->push(std::make_unique<Conv2d>(join_name(this->name(), "conv2"), mid, out, 3, 1, 1, 1, false, init));
  body_->push(make_norm(norm, join_name(this->name(), "norm2"), out, init));
  body_->push(std::make_unique<Activation>(join_name(this->name(), "act2"), act));
}

Tensor ConvStem::forward(const Tensor& x, ForwardContext& ctx) { return body_->forward(x, ctx); }

Shape ConvStem::infer(const Shape& chw, CostLedger* ledger) const { return body_->infer(chw, ledger); }

std::unique_ptr<Module> make_stem(StemKind kind, const std::string& name, int64_t out_channels, NormKind norm,
                                  ActKind act, InitContext& init) {
  if (kind == StemKind::kPatchify2x2) return std::make_unique<PatchifyStem>(name, 3, out_channels, 2, norm, init);
  return std::make_unique<ConvStem>(name, 3, std::max<int64_t>(1, out_channels / 2), out_channels, norm, act, init);
}

// ---------------------------------------------------------------------------

Tensor stochastic_depth(const Tensor& branch, double p, bool training, Rng* rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("stochastic_depth: p must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return branch;
  if (rng == nullptr) throw ConfigError("stochastic_depth: training mode needs an rng");
  std::bernoulli_distribution drop(p);
  std::vector<double> factors(static_cast<size_t>(branch.dim(0)));
  for (auto& f : factors) f = drop(*rng) ? 0.0 : 1.0 / (1.0 - p);
  return sample_scale(branch, factors);
}

}  // namespace nex
