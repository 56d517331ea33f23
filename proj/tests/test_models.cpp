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

#include <map>
#include <set>

#include "nexception/cost.hpp"
#include "nexception/model.hpp"
#include "support.hpp"

namespace nex {
namespace {

using testing::values;
constexpr DType kF64 = DType::kFloat64;

void zero_parameters(Module& m) {
  std::vector<Parameter*> ps;
  m.collect(ps);
  for (auto* p : ps) {
    if (p->trainable) p->value.assign(Tensor::zeros(p->value.shape(), p->value.dtype()));
  }
}

std::map<std::string, Shape> trace_forward(ModelGraph& m, int64_t hw) {
  std::vector<std::pair<std::string, Shape>> tr;
  ForwardContext ctx;
  ctx.trace = &tr;
  Rng rng(0);
  NoGradGuard g;
  m.forward(Tensor::randn({1, 3, hw, hw}, rng), ctx);
  return {tr.begin(), tr.end()};
}

TEST_CASE("nexception block residual identity") {
  Rng rng(1);
  InitContext init{rng, kF64};
  NexceptionBlock blk("b", 16, 5, nexception_defaults(), 0.0, init);
  zero_parameters(blk);
  blk.se()->set_bypass(true);
  const Tensor x = Tensor::randn({2, 16, 6, 6}, rng, 1.0, kF64);
  ForwardContext ctx;
  CHECK(values(blk.forward(x, ctx)) == values(x));
  ctx.training = true;
  CHECK(values(blk.forward(x, ctx)) == values(x));
}

TEST_CASE("nexception block widths and counts") {
  Rng rng(2);
  InitContext init{rng};
  CHECK(NexceptionBlock("b", 512, 5, nexception_defaults(), 0.0, init).expanded_channels() == 1536);
  ArchConfig off = nexception_defaults();
  off.bottleneck = Bottleneck::kOff;
  CHECK(NexceptionBlock("b", 512, 5, off, 0.0, init).expanded_channels() == 512);

  // C = 96, k = 5 with the searched config: expansion conv without bias
  // (normalised), two projections with bias, one batch norm on 288 channels
  // and an SE module with 6 hidden units.
  const int64_t c = 96, e = 288, k2 = 25, h = 6;
  const int64_t sep1 = c * k2 + c * e;
  const int64_t sep2 = e * k2 + e * c + c;
  const int64_t sep3 = c * k2 + c * c + c;
  const int64_t norm = 2 * e;
  const int64_t se = c * h + h + h * c + c;
  NexceptionBlock blk("b", c, 5, nexception_defaults(), 0.0, init);
  CHECK(blk.trainable_count() == sep1 + sep2 + sep3 + norm + se);
  CostLedger ledger;
  blk.infer({c, 56, 56}, &ledger);
  int64_t ledger_params = 0;
  for (const auto& row : ledger) ledger_params += row.params;
  CHECK(ledger_params == blk.trainable_count());
  CHECK_THROWS_AS(blk.infer({64, 56, 56}, nullptr), ConfigError);
  CHECK_THROWS_AS(NexceptionBlock("b", 8, 5, nexception_defaults(), 1.0, init), ConfigError);
}

TEST_CASE("downsample block with a zero branch is its shortcut") {
  Rng rng(3);
  InitContext init{rng, kF64};
  for (PoolKind pool : {PoolKind::kMaxPool, PoolKind::kStridedConv, PoolKind::kBlurPool}) {
    ArchConfig cfg = nexception_defaults();
    cfg.pool = pool;
    DownsampleBlock blk("d", 8, 16, 3, cfg, true, init);
    testing::randomize(blk, rng);
    const Tensor x = Tensor::randn({2, 8, 8, 8}, rng, 1.0, kF64);
    ForwardContext ctx;
    const auto skip = values(blk.shortcut(x, ctx));
    std::vector<Parameter*> ps;
    blk.collect(ps);
    for (auto* p : ps) {
      if (p->name.find("shortcut") == std::string::npos && p->trainable) {
        p->value.assign(Tensor::zeros(p->value.shape(), kF64));
      }
    }
    CHECK(values(blk.forward(x, ctx)) == skip);
    CHECK(blk.infer({8, 8, 8}, nullptr) == Shape{16, 4, 4});
  }
}

TEST_CASE("stage shapes of the named variants") {
  SUBCASE("nexception_t") {
    auto m = build_variant("nexception_t");
    CHECK(m->input_hw() == 224);
    const auto t = trace_forward(*m, 224);
    CHECK(t.at("stem") == Shape{96, 112, 112});
    CHECK(t.at("entry.0") == Shape{128, 56, 56});
    CHECK(t.at("entry.1") == Shape{256, 28, 28});
    CHECK(t.at("entry.2") == Shape{512, 14, 14});
    CHECK(t.at("middle") == Shape{512, 14, 14});
    CHECK(t.at("exit") == Shape{2048, 7, 7});
    CHECK(t.at("head") == Shape{1000});
  }
  SUBCASE("nexception_s") {
    auto m = build_variant("nexception_s");
    CHECK(trace_forward(*m, 224).at("middle") == Shape{752, 14, 14});
  }
  SUBCASE("xception") {
    auto m = build_variant("xception");
    CHECK(m->input_hw() == 299);
    const auto t = trace_forward(*m, 299);
    CHECK(t.at("entry.0")[0] == 128);
    CHECK(t.at("entry.1")[0] == 256);
    CHECK(t.at("middle") == Shape{728, 19, 19});
  }
  SUBCASE("nexception_tp") {
    auto m = build_variant("nexception_tp");
    const auto t = trace_forward(*m, 224);
    CHECK(t.at("stem") == Shape{96, 56, 56});
    CHECK(t.at("stage1")[1] == 56);
    CHECK(t.at("stage2")[1] == 28);
    CHECK(t.at("stage3")[1] == 14);
    CHECK(t.at("stage4")[1] == 7);
  }
}

TEST_CASE("reduced network builds for every minimal configuration") {
  ArchConfig minimal;
  minimal.kernel_entry = minimal.kernel_middle = minimal.kernel_exit = 3;
  minimal.stem = StemKind::kConv;
  minimal.pool = PoolKind::kMaxPool;
  minimal.bottleneck = Bottleneck::kOff;
  minimal.se = false;
  minimal.act = ActKind::kReLU;
  minimal.act_position = ActPosition::kNone;
  minimal.norm = NormKind::kBatch;
  minimal.norm_position = NormPosition::kPreBlock;
  ModelOptions mo;
  mo.num_classes = 10;
  mo.nas_width = 8;
  auto m = build_variant("reduced_nas", mo, &minimal);
  Rng rng(4);
  ForwardContext ctx;
  const Tensor y = m->forward(Tensor::randn({1, 3, 32, 32}, rng), ctx);
  CHECK(y.shape() == Shape{1, 10});
  CHECK(m->config().has_value());
  CHECK(*m->config() == minimal);
}

TEST_CASE("graph contracts") {
  auto m = build_variant("reduced_nas");
  std::set<std::string> names;
  for (Parameter* p : m->parameters()) CHECK(names.insert(p->name).second);
  CHECK(m->find(m->parameters().front()->name) == m->parameters().front());
  ForwardContext ctx;
  CHECK_THROWS_AS(m->forward(Tensor::zeros({1, 1, 32, 32}), ctx), ConfigError);
  CHECK_THROWS_AS(build_variant("resnet50"), ConfigError);
  try {
    build_variant("resnet50");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("nexception_t") != std::string::npos);
  }
  // Other resolutions run; the native-resolution expectations are not applied.
  const Tensor y = m->forward(Tensor::zeros({2, 3, 64, 64}), ctx);
  CHECK(y.shape() == Shape{2, 1000});
}

TEST_CASE("closed-form layer costs") {
  Rng rng(5);
  InitContext init{rng};
  CostLedger ledger;
  Conv2d conv("c", 64, 128, 3, 1, 1, 1, true, init);
  conv.infer({64, 56, 56}, &ledger);
  CHECK(ledger.back().params == 73856);
  Conv2d pw("p", 64, 128, 1, 1, 0, 1, false, init);
  pw.infer({64, 56, 56}, &ledger);
  CHECK(ledger.back().macs == 25690112);
  Conv2d dw("d", 32, 32, 5, 2, 2, 32, false, init);
  dw.infer({32, 28, 28}, &ledger);
  CHECK(ledger.back().macs == 14 * 14 * 32 * 25);
  Linear fc("fc", 2048, 1000, true, init);
  fc.infer({2048}, &ledger);
  CHECK(ledger.back().macs == 2048 * 1000);
  CHECK(ledger.back().params == 2048 * 1000 + 1000);
}

TEST_CASE("cost reports") {
  auto m = build_variant("nexception_t");
  const CostReport r = count_cost(*m);
  CHECK(r.input_hw == 224);
  int64_t p = 0, f = 0;
  for (const auto& row : r.layers) {
    p += row.params;
    f += row.macs;
  }
  CHECK(p == r.total_params);
  CHECK(f == r.total_flops);
  int64_t direct = 0;
  for (Parameter* q : m->parameters()) direct += q->trainable ? q->value.numel() : 0;
  CHECK(direct == r.total_params);
  CHECK(r.output == Shape{1000});

  const CostReport big = count_flops(*m, 448);
  CHECK(big.total_params == r.total_params);
  CHECK(count_params(*m).total_params == r.total_params);
  // Conv cost quadruples; fully connected layers (head and SE) do not depend
  // on resolution.
  int64_t fc = 0;
  for (const auto& row : r.layers) {
    if (row.kind == "linear") fc += row.macs;
  }
  CHECK(fc > 2048 * 1000);
  CHECK(big.total_flops - fc == 4 * (r.total_flops - fc));
}

TEST_CASE("variant totals") {
  struct Want {
    const char* name;
    double params, flops;
  };
  for (const Want& w : {Want{"nexception_t", 24.5e6, 4.7e9}, Want{"nexception_s", 43.4e6, 8.5e9},
                        Want{"nexception_tp", 26.6e6, 4.5e9}}) {
    const CostReport r = count_cost(*build_variant(w.name));
    INFO(w.name << " params " << r.total_params << " flops " << r.total_flops);
    CHECK(std::abs(r.total_params / w.params - 1) <= 0.03);
    CHECK(std::abs(r.total_flops / w.flops - 1) <= 0.05);
  }
  // The Xception baseline is built from the shared block vocabulary; its
  // parameter total lands 3.2% under the published 23.6M (see README), which
  // this test records rather than hides.
  const CostReport x = count_cost(*build_variant("xception"));
  CHECK(std::abs(x.total_flops / 8.4e9 - 1) <= 0.05);
  CHECK(x.total_params == 22855952);
}

}  // namespace
}  // namespace nex
