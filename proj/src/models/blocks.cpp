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
#include <algorithm>

#include "nexception/model.hpp"

namespace nex {

namespace {

bool norm_after_first(NormPosition p) {
  return p == NormPosition::kAfterFirstConv || p == NormPosition::kAfterAllConvs;
}
bool act_after_first(ActPosition p) {
  return p == ActPosition::kAfterExpandOnly || p == ActPosition::kAfterAllConvs;
}

// Appends a separable conv and whatever norm/activation the config places
// after it. The first conv of a branch is the expansion (or widening) conv.
void push_sep(Sequential& body, const std::string& prefix, int index, int64_t in, int64_t out, int64_t kernel,
              const ArchConfig& cfg, bool first, bool last, InitContext& init) {
  const bool norm_here = first ? norm_after_first(cfg.norm_position) : cfg.norm_position == NormPosition::kAfterAllConvs;
  const bool act_here = first ? act_after_first(cfg.act_position) : cfg.act_position == ActPosition::kAfterAllConvs;
  const bool post_norm = last && cfg.norm_position == NormPosition::kPostBlock;
  const std::string tag = std::to_string(index);
  body.push(std::make_unique<SeparableConv>(join_name(prefix, "sep" + tag), in, out, kernel, 1,
                                            !(norm_here || post_norm), init));
  if (norm_here) body.push(make_norm(cfg.norm, join_name(prefix, "norm" + tag), out, init));
  if (act_here) body.push(std::make_unique<Activation>(join_name(prefix, "act" + tag), cfg.act));
  if (post_norm) body.push(make_norm(cfg.norm, join_name(prefix, "post_norm"), out, init));
}

void push_pre(Sequential& body, const std::string& prefix, int64_t channels, const ArchConfig& cfg,
              InitContext& init) {
  if (cfg.norm_position == NormPosition::kPreBlock) {
    body.push(make_norm(cfg.norm, join_name(prefix, "pre_norm"), channels, init));
  }
  if (cfg.act_position == ActPosition::kPreBlock) {
    body.push(std::make_unique<Activation>(join_name(prefix, "pre_act"), cfg.act));
  }
}

std::unique_ptr<Module> make_pool(PoolKind kind, const std::string& name, int64_t channels, InitContext& init) {
  switch (kind) {
    case PoolKind::kMaxPool: return std::make_unique<MaxPool>(name, 3, 2, 1);
    case PoolKind::kStridedConv:
      return std::make_unique<Conv2d>(name, channels, channels, 3, 2, 1, channels, false, init);
    case PoolKind::kBlurPool: return std::make_unique<MaxBlurPool>(name, channels, init.dtype);
  }
  throw ConfigError("bad pool kind");
}

void require_channels(const Tensor& x, int64_t c, const std::string& who) {
  if (x.rank() != 4 || x.dim(1) != c) {
    throw ConfigError(who + ": expected " + std::to_string(c) + " channels, got " + shape_str(x.shape()));
  }
}

}  // namespace

NexceptionBlock::NexceptionBlock(std::string name, int64_t channels, int64_t kernel, const ArchConfig& cfg,
                                 double drop_p, InitContext& init)
    : Module(std::move(name)),
      channels_(channels),
      expanded_(cfg.bottleneck == Bottleneck::kInverted3 ? channels * kExpansion : channels),
      drop_p_(drop_p) {
  cfg.validate();
  if (!(drop_p >= 0.0 && drop_p < 1.0)) throw ConfigError(this->name() + ": drop probability must be in [0, 1)");
  body_ = adopt(std::make_unique<Sequential>(join_name(this->name(), "branch")));
  const std::string& p = this->name();
  push_pre(*body_, p, channels, cfg, init);
  push_sep(*body_, p, 1, channels, expanded_, kernel, cfg, true, false, init);
  push_sep(*body_, p, 2, expanded_, channels, kernel, cfg, false, false, init);
  push_sep(*body_, p, 3, channels, channels, kernel, cfg, false, true, init);
  if (cfg.se) se_ = adopt(std::make_unique<SEModule>(join_name(p, "se"), channels, init));
}

Tensor NexceptionBlock::branch(const Tensor& x, ForwardContext& ctx) {
  require_channels(x, channels_, name());
  Tensor b = body_->forward(x, ctx);
  if (se_) b = se_->forward(b, ctx);
  return b;
}

Tensor NexceptionBlock::forward(const Tensor& x, ForwardContext& ctx) {
  Tensor b = branch(x, ctx);
  return add(x, stochastic_depth(b, drop_p_, ctx.training, ctx.rng));
}

Shape NexceptionBlock::infer(const Shape& chw, CostLedger* ledger) const {
  if (chw.empty() || chw[0] != channels_) throw ConfigError(name() + ": channel mismatch for " + shape_str(chw));
  Shape s = body_->infer(chw, ledger);
  if (se_) s = se_->infer(s, ledger);
  return s;
}

DownsampleBlock::DownsampleBlock(std::string name, int64_t in, int64_t out, int64_t kernel, const ArchConfig& cfg,
                                 bool widen_first, InitContext& init)
    : Module(std::move(name)), in_(in), out_(out) {
  cfg.validate();
  const std::string& p = this->name();
  const int64_t mid = widen_first ? out : in;
  body_ = adopt(std::make_unique<Sequential>(join_name(p, "branch")));
  push_pre(*body_, p, in, cfg, init);
  push_sep(*body_, p, 1, in, mid, kernel, cfg, true, false, init);
  push_sep(*body_, p, 2, mid, out, kernel, cfg, false, true, init);
  body_->push(make_pool(cfg.pool, join_name(p, "pool"), out, init));
  if (cfg.se) se_ = adopt(std::make_unique<SEModule>(join_name(p, "se"), out, init));
  skip_ = adopt(std::make_unique<Sequential>(join_name(p, "shortcut")));
  skip_->push(std::make_unique<Conv2d>(join_name(p, "shortcut.conv"), in, out, 1, 2, 0, 1, false, init));
  skip_->push(make_norm(cfg.norm, join_name(p, "shortcut.norm"), out, init));
}

Tensor DownsampleBlock::shortcut(const Tensor& x, ForwardContext& ctx) { return skip_->forward(x, ctx); }

Tensor DownsampleBlock::forward(const Tensor& x, ForwardContext& ctx) {
  require_channels(x, in_, name());
  Tensor b = body_->forward(x, ctx);
  if (se_) b = se_->forward(b, ctx);
  return add(b, skip_->forward(x, ctx));
}

Shape DownsampleBlock::infer(const Shape& chw, CostLedger* ledger) const {
  if (chw.empty() || chw[0] != in_) throw ConfigError(name() + ": channel mismatch for " + shape_str(chw));
  Shape s = body_->infer(chw, ledger);
  if (se_) s = se_->infer(s, ledger);
  Shape k = skip_->infer(chw, ledger);
  if (k != s) throw ConfigError(name() + ": branch " + shape_str(s) + " and shortcut " + shape_str(k) + " disagree");
  return s;
}

PatchMerge::PatchMerge(std::string name, int64_t in, int64_t out, InitContext& init) : Module(std::move(name)) {
  body_ = adopt(std::make_unique<Sequential>(this->name()));
  body_->push(std::make_unique<BatchNorm2d>(join_name(this->name(), "norm"), in, init));
  body_->push(std::make_unique<Conv2d>(join_name(this->name(), "conv"), in, out, 2, 2, 0, 1, true, init));
}

Tensor PatchMerge::forward(const Tensor& x, ForwardContext& ctx) { return body_->forward(x, ctx); }

Shape PatchMerge::infer(const Shape& chw, CostLedger* ledger) const { return body_->infer(chw, ledger); }

ClassifierHead::ClassifierHead(std::string name, int64_t channels, int64_t classes, bool pre_norm, InitContext& init)
    : Module(std::move(name)) {
  if (pre_norm) norm_ = adopt(std::make_unique<LayerNorm2d>(join_name(this->name(), "norm"), channels, init));
  fc_ = adopt(std::make_unique<Linear>(join_name(this->name(), "fc"), channels, classes, true, init));
}

Tensor ClassifierHead::forward(const Tensor& x, ForwardContext& ctx) {
  Tensor pooled = global_avg_pool(x);
  if (norm_) {
    const int64_t n = pooled.dim(0), c = pooled.dim(1);
    pooled = reshape(norm_->forward(reshape(pooled, {n, c, 1, 1}), ctx), {n, c});
  }
  return fc_->forward(pooled, ctx);
}

Shape ClassifierHead::infer(const Shape& chw, CostLedger* ledger) const {
  if (chw.size() != 3) throw ConfigError(name() + ": expected [C, H, W], got " + shape_str(chw));
  if (ledger) ledger->push_back(LayerCost{join_name(name(), "gap"), "avgpool", {chw[0]}, 0, 0});
  if (norm_) norm_->infer({chw[0], 1, 1}, ledger);
  return fc_->infer({chw[0]}, ledger);
}

}  // namespace nex
