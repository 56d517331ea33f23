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

ModelGraph::ModelGraph(std::string arch, std::optional<ArchConfig> config, ModelOptions options)
    : arch_(std::move(arch)), config_(std::move(config)), options_(options) {}

void ModelGraph::add_stage(const std::string& name, std::unique_ptr<Module> module) {
  stages_.push_back(Stage{name, module.get(), {}});
  owned_.push_back(std::move(module));
}

void ModelGraph::finalize() {
  Shape s{3, options_.input_hw, options_.input_hw};
  for (auto& st : stages_) {
    s = st.module->infer(s, nullptr);
    st.expected = s;
  }
  std::vector<std::string> names;
  for (Parameter* p : parameters()) names.push_back(p->name);
  std::sort(names.begin(), names.end());
  auto dup = std::adjacent_find(names.begin(), names.end());
  if (dup != names.end()) throw ConfigError("duplicate parameter name " + *dup);
}

Tensor ModelGraph::forward(const Tensor& x, ForwardContext& ctx) {
  if (x.rank() != 4 || x.dim(1) != 3) throw ConfigError("model input must be [N, 3, H, W], got " + shape_str(x.shape()));
  const bool native = x.dim(2) == options_.input_hw && x.dim(3) == options_.input_hw;
  Tensor h = x;
  for (const auto& st : stages_) {
    h = st.module->forward(h, ctx);
    Shape got(h.shape().begin() + 1, h.shape().end());
    if (ctx.trace) ctx.trace->emplace_back(st.name, got);
    if (native && got != st.expected) {
      throw ConfigError("stage " + st.name + " produced " + shape_str(got) + ", expected " + shape_str(st.expected));
    }
  }
  return h;
}

Shape ModelGraph::infer(const Shape& chw, CostLedger* ledger) const {
  Shape s = chw;
  for (const auto& st : stages_) s = st.module->infer(s, ledger);
  return s;
}

std::vector<Parameter*> ModelGraph::parameters() {
  std::vector<Parameter*> out;
  for (auto& st : stages_) st.module->collect(out);
  return out;
}

Parameter* ModelGraph::find(const std::string& name) {
  for (Parameter* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

void ModelGraph::zero_grad() {
  for (Parameter* p : parameters()) p->value.zero_grad();
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"nexception_t", "nexception_s", "nexception_tp", "xception",
                                                 "reduced_nas"};
  return names;
}

ArchConfig nexception_defaults() { return ArchConfig{}; }

ArchConfig xception_config() {
  ArchConfig c;
  c.kernel_entry = c.kernel_middle = c.kernel_exit = 3;
  c.stem = StemKind::kConv;
  c.pool = PoolKind::kMaxPool;
  c.bottleneck = Bottleneck::kOff;
  c.se = false;
  c.act = ActKind::kReLU;
  c.act_position = ActPosition::kAfterAllConvs;
  c.norm = NormKind::kBatch;
  c.norm_position = NormPosition::kAfterAllConvs;
  return c;
}

namespace {

std::unique_ptr<Sequential> stage(const std::string& name) {
  auto s = std::make_unique<Sequential>(name);
  s->trace_children = true;
  return s;
}

// Exit flow tail shared by the isotropic variants: two 3x3 separable convs,
// each followed by norm and activation.
void push_exit_convs(Sequential& exit, int64_t in, const ArchConfig& cfg, InitContext& init, int64_t c1, int64_t c2) {
  exit.push(std::make_unique<SeparableConv>("exit.sep1", in, c1, 3, 1, false, init));
  exit.push(make_norm(cfg.norm, "exit.norm1", c1, init));
  exit.push(std::make_unique<Activation>("exit.act1", cfg.act));
  exit.push(std::make_unique<SeparableConv>("exit.sep2", c1, c2, 3, 1, false, init));
  exit.push(make_norm(cfg.norm, "exit.norm2", c2, init));
  exit.push(std::make_unique<Activation>("exit.act2", cfg.act));
}

struct IsotropicPlan {
  int64_t stem_channels;
  std::vector<int64_t> entry;  // output channels of each entry downsample block
  int64_t middle_blocks;
  int64_t exit_channels;       // downsample block output
  int64_t head1, head2;        // exit separable conv widths
};

std::unique_ptr<ModelGraph> build_isotropic(const std::string& arch, const ArchConfig& cfg, const IsotropicPlan& plan,
                                            ModelOptions opt, std::optional<ArchConfig> record_cfg) {
  Rng rng(opt.seed);
  InitContext init{rng, opt.dtype};
  auto m = std::make_unique<ModelGraph>(arch, record_cfg, opt);

  m->add_stage("stem", make_stem(cfg.stem, "stem", plan.stem_channels, cfg.norm, cfg.act, init));

  auto entry = stage("entry");
  int64_t c = plan.stem_channels;
  for (size_t i = 0; i < plan.entry.size(); ++i) {
    entry->push(std::make_unique<DownsampleBlock>("entry." + std::to_string(i), c, plan.entry[i], cfg.kernel_entry, cfg,
                                                  true, init));
    c = plan.entry[i];
  }
  m->add_stage("entry", std::move(entry));

  auto middle = stage("middle");
  for (int64_t i = 0; i < plan.middle_blocks; ++i) {
    middle->push(std::make_unique<NexceptionBlock>("middle." + std::to_string(i), c, cfg.kernel_middle, cfg,
                                                   opt.drop_path, init));
  }
  m->add_stage("middle", std::move(middle));

  auto exit = stage("exit");
  exit->push(std::make_unique<DownsampleBlock>("exit.down", c, plan.exit_channels, cfg.kernel_exit, cfg, false, init));
  push_exit_convs(*exit, plan.exit_channels, cfg, init, plan.head1, plan.head2);
  m->add_stage("exit", std::move(exit));

  m->add_stage("head", std::make_unique<ClassifierHead>("head", plan.head2, opt.num_classes, false, init));
  m->finalize();
  return m;
}

std::unique_ptr<ModelGraph> build_pyramid(ModelOptions opt) {
  Rng rng(opt.seed);
  InitContext init{rng, opt.dtype};
  const ArchConfig cfg = nexception_defaults();
  auto m = std::make_unique<ModelGraph>("nexception_tp", std::nullopt, opt);
  constexpr int64_t kWidths[4] = {96, 192, 384, 768};
  constexpr int64_t kDepths[4] = {3, 4, 9, 3};
  m->add_stage("stem", std::make_unique<PatchifyStem>("stem", 3, kWidths[0], 4, NormKind::kBatch, init));
  for (int s = 0; s < 4; ++s) {
    const std::string name = "stage" + std::to_string(s + 1);
    auto st = stage(name);
    if (s > 0) st->push(std::make_unique<PatchMerge>(name + ".down", kWidths[s - 1], kWidths[s], init));
    for (int64_t b = 0; b < kDepths[s]; ++b) {
      st->push(std::make_unique<NexceptionBlock>(name + "." + std::to_string(b), kWidths[s], cfg.kernel_middle, cfg,
                                                 opt.drop_path, init));
    }
    m->add_stage(name, std::move(st));
  }
  m->add_stage("head", std::make_unique<ClassifierHead>("head", kWidths[3], opt.num_classes, true, init));
  m->finalize();
  return m;
}

}  // namespace

std::unique_ptr<ModelGraph> build_variant(const std::string& name, ModelOptions opt, const ArchConfig* config) {
  if (opt.num_classes <= 0) throw ConfigError("num_classes must be positive");
  if (!(opt.drop_path >= 0.0 && opt.drop_path < 1.0)) throw ConfigError("drop_path must be in [0, 1)");
  if (name == "nexception_t" || name == "nexception_s") {
    if (opt.input_hw == 0) opt.input_hw = 224;
    const int64_t trunk = name == "nexception_t" ? 512 : 752;
    return build_isotropic(name, nexception_defaults(), {96, {128, 256, trunk}, 8, 1024, 1536, 2048}, opt,
                           std::nullopt);
  }
  if (name == "nexception_tp") {
    if (opt.input_hw == 0) opt.input_hw = 224;
    return build_pyramid(opt);
  }
  if (name == "xception") {
    if (opt.input_hw == 0) opt.input_hw = 299;
    return build_isotropic(name, xception_config(), {64, {128, 256, 728}, 8, 1024, 1536, 2048}, opt, std::nullopt);
  }
  if (name == "reduced_nas") {
    if (opt.input_hw == 0) opt.input_hw = 32;
    const ArchConfig cfg = config ? *config : ArchConfig{};
    cfg.validate();
    const int64_t w = opt.nas_width;
    if (w < 2) throw ConfigError("nas_width must be at least 2");
    // One entry downsample, four middle blocks.
    return build_isotropic(name, cfg, {w, {2 * w}, 4, 4 * w, 6 * w, 8 * w}, opt, cfg);
  }
  std::string known;
  for (const auto& n : variant_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown model '" + name + "' (known: " + known + ")");
}

}  // namespace nex
