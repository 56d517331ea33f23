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

// Float64 central-difference checks for every differentiable op, every layer
// and the residual blocks. Shared by the unit tests and the acceptance run.

#include <memory>
#include <string>
#include <vector>

#include "nexception/model.hpp"
#include "support.hpp"

namespace nex::testing {

struct GradCase {
  std::string name;
  double tolerance;
  std::function<GradCheck()> run;
};

namespace detail_grad {

constexpr DType kF64 = DType::kFloat64;

inline Tensor rnd(Rng& rng, const Shape& s, double sd = 1.0) { return Tensor::randn(s, rng, sd, kF64); }

// Op-level case: inputs are the leaves, the loss is weighted_sum(f(inputs)).
inline GradCase op_case(std::string name, std::vector<Shape> shapes, std::function<Tensor(std::vector<Tensor>&)> f,
                        uint64_t seed, double tol = 1e-4) {
  return {name, tol, [shapes, f, seed]() {
            Rng rng(seed);
            std::vector<Tensor> in;
            for (const auto& s : shapes) in.push_back(rnd(rng, s));
            Tensor probe;
            {
              NoGradGuard g;
              probe = f(in);
            }
            const Tensor r = rnd(rng, probe.shape());
            return gradcheck([&] { return weighted_sum(f(in), r); }, in);
          }};
}

// Module-level case: gradient with respect to the input and every trainable
// parameter, in training mode.
inline GradCase module_case(std::string name, Shape input,
                            std::function<std::unique_ptr<Module>(InitContext&)> make, uint64_t seed,
                            double tol = 1e-4, bool training = true) {
  return {name, tol, [input, make, seed, training]() {
            Rng rng(seed);
            InitContext init{rng, kF64};
            std::shared_ptr<Module> m = make(init);
            randomize(*m, rng, 0.5);
            Tensor x = rnd(rng, input);
            ForwardContext ctx;
            ctx.training = training;
            Tensor probe;
            {
              NoGradGuard g;
              probe = m->forward(x, ctx);
            }
            const Tensor r = rnd(rng, probe.shape());
            std::vector<Tensor> leaves{x};
            for (auto& p : trainable_values(*m)) leaves.push_back(p);
            return gradcheck([&] { return weighted_sum(m->forward(x, ctx), r); }, leaves);
          }};
}

}  // namespace detail_grad

inline std::vector<GradCase> gradient_cases() {
  using namespace detail_grad;
  using V = std::vector<Tensor>;
  std::vector<GradCase> c;

  // Ops.
  c.push_back(op_case("conv2d dense", {{2, 3, 5, 5}, {4, 3, 3, 3}, {4}},
                      [](V& v) { return conv2d(v[0], v[1], v[2], {1, 1, 1}); }, 1));
  c.push_back(op_case("conv2d strided", {{1, 2, 7, 7}, {3, 2, 3, 3}},
                      [](V& v) { return conv2d(v[0], v[1], Tensor(), {2, 1, 1}); }, 2));
  c.push_back(op_case("conv2d depthwise k5", {{2, 3, 6, 6}, {3, 1, 5, 5}},
                      [](V& v) { return conv2d(v[0], v[1], Tensor(), {1, 2, 3}); }, 3));
  c.push_back(op_case("conv2d depthwise strided", {{1, 4, 7, 7}, {4, 1, 3, 3}},
                      [](V& v) { return conv2d(v[0], v[1], Tensor(), {2, 1, 4}); }, 4));
  c.push_back(op_case("conv2d grouped", {{1, 4, 5, 5}, {6, 2, 3, 3}, {6}},
                      [](V& v) { return conv2d(v[0], v[1], v[2], {1, 1, 2}); }, 5));
  c.push_back(op_case("conv2d patchify", {{1, 3, 4, 4}, {5, 3, 2, 2}, {5}},
                      [](V& v) { return conv2d(v[0], v[1], v[2], {2, 0, 1}); }, 6));
  c.push_back(op_case("linear", {{3, 5}, {4, 5}, {4}}, [](V& v) { return linear(v[0], v[1], v[2]); }, 7));
  for (ActKind k : {ActKind::kReLU, ActKind::kGELU, ActKind::kELU, ActKind::kCELU}) {
    c.push_back(op_case(std::string("activation ") + act_name(k), {{2, 3, 4, 4}},
                        [k](V& v) { return activation(v[0], k); }, 8));
  }
  c.push_back(op_case("sigmoid", {{2, 7}}, [](V& v) { return sigmoid(v[0]); }, 9));
  c.push_back(op_case("batch_norm training", {{3, 2, 3, 3}, {2}, {2}},
                      [](V& v) {
                        BatchNormState st{v[1], v[2], Tensor::zeros({2}, kF64), Tensor::full({2}, 1.0, kF64)};
                        return batch_norm(v[0], st, true);
                      },
                      10));
  c.push_back(op_case("batch_norm eval", {{2, 2, 3, 3}, {2}, {2}},
                      [](V& v) {
                        BatchNormState st{v[1], v[2], Tensor::full({2}, 0.3, kF64), Tensor::full({2}, 2.0, kF64)};
                        return batch_norm(v[0], st, false);
                      },
                      11));
  c.push_back(op_case("layer_norm", {{2, 5, 3, 3}, {5}, {5}}, [](V& v) { return layer_norm(v[0], v[1], v[2]); }, 12));
  c.push_back(op_case("global_avg_pool", {{2, 3, 4, 5}}, [](V& v) { return global_avg_pool(v[0]); }, 13));
  c.push_back(op_case("max_pool2d k3 s2", {{2, 2, 7, 7}}, [](V& v) { return max_pool2d(v[0], 3, 2, 1); }, 14));
  c.push_back(op_case("max_pool2d k3 s1", {{1, 2, 5, 5}}, [](V& v) { return max_pool2d(v[0], 3, 1, 1); }, 15));
  c.push_back(op_case("add", {{2, 3}, {2, 3}}, [](V& v) { return add(v[0], v[1]); }, 16));
  c.push_back(op_case("mul", {{2, 3}, {2, 3}}, [](V& v) { return mul(v[0], v[1]); }, 17));
  c.push_back(op_case("scale", {{4}}, [](V& v) { return scale(v[0], -1.7); }, 18));
  c.push_back(op_case("square", {{4}}, [](V& v) { return square(v[0]); }, 19));
  c.push_back(op_case("sum", {{2, 3}}, [](V& v) { return reshape(sum(v[0]), {1}); }, 20));
  c.push_back(op_case("mean", {{2, 3}}, [](V& v) { return reshape(mean(v[0]), {1}); }, 21));
  c.push_back(op_case("reshape", {{2, 6}}, [](V& v) { return reshape(v[0], {3, 4}); }, 22));
  c.push_back(op_case("channel_scale", {{2, 3, 2, 2}, {2, 3}}, [](V& v) { return channel_scale(v[0], v[1]); }, 23));
  c.push_back(op_case("sample_scale", {{3, 2, 2}},
                      [](V& v) {
                        const double f[] = {0.0, 1.5, -2.0};
                        return sample_scale(v[0], f);
                      },
                      24));
  c.push_back(op_case("bce_with_logits", {{3, 4}},
                      [](V& v) {
                        const Tensor t = Tensor::from_values({3, 4}, {0, 0.1, 0.5, 1, 0.2, 0.8, 0.3, 0, 1, 1, 0.4, 0.6},
                                                             kF64);
                        return reshape(bce_with_logits(v[0], t), {1});
                      },
                      25));
  c.push_back(op_case("soft_cross_entropy", {{3, 4}},
                      [](V& v) {
                        const Tensor t = Tensor::from_values({3, 4}, {0, 0, 1, 0, 0.25, 0.25, 0.5, 0, 0.1, 0.2, 0.3, 0.4},
                                                             kF64);
                        return reshape(soft_cross_entropy(v[0], t), {1});
                      },
                      26));

  // Layers.
  c.push_back(module_case("Conv2d", {2, 3, 5, 5},
                          [](InitContext& i) { return std::make_unique<Conv2d>("c", 3, 4, 3, 1, 1, 1, true, i); }, 30));
  c.push_back(module_case("BatchNorm2d", {3, 4, 3, 3},
                          [](InitContext& i) { return std::make_unique<BatchNorm2d>("bn", 4, i); }, 32));
  c.push_back(module_case("LayerNorm2d", {2, 4, 3, 3},
                          [](InitContext& i) { return std::make_unique<LayerNorm2d>("ln", 4, i); }, 33));
  c.push_back(module_case("SeparableConv k3", {2, 3, 6, 6},
                          [](InitContext& i) { return std::make_unique<SeparableConv>("s", 3, 5, 3, 1, true, i); },
                          34));
  c.push_back(module_case("SeparableConv k5 s2", {1, 4, 7, 7},
                          [](InitContext& i) { return std::make_unique<SeparableConv>("s", 4, 6, 5, 2, false, i); },
                          35));
  c.push_back(module_case("SEModule", {2, 8, 3, 3},
                          [](InitContext& i) { return std::make_unique<SEModule>("se", 8, i, 4); }, 36));
  c.push_back(module_case("MaxPool", {1, 2, 6, 6},
                          [](InitContext&) { return std::make_unique<MaxPool>("mp", 3, 2, 1); }, 37));
  c.push_back(module_case("MaxBlurPool", {1, 3, 6, 6},
                          [](InitContext& i) { return std::make_unique<MaxBlurPool>("mbp", 3, i.dtype); }, 38));
  c.push_back(module_case("PatchifyStem", {2, 3, 4, 4},
                          [](InitContext& i) {
                            return std::make_unique<PatchifyStem>("stem", 3, 4, 2, NormKind::kBatch, i);
                          },
                          39));
  c.push_back(module_case("ConvStem", {2, 3, 6, 6},
                          [](InitContext& i) {
                            return std::make_unique<ConvStem>("stem", 3, 4, 5, NormKind::kBatch, ActKind::kGELU, i);
                          },
                          40));
  c.push_back(module_case("PatchMerge", {2, 4, 4, 4},
                          [](InitContext& i) { return std::make_unique<PatchMerge>("pm", 4, 6, i); }, 41));
  c.push_back(module_case("ClassifierHead", {2, 6, 3, 3},
                          [](InitContext& i) { return std::make_unique<ClassifierHead>("head", 6, 5, true, i); }, 42));

  // Blocks.
  auto block = [&](std::string name, ArchConfig cfg, uint64_t seed) {
    c.push_back(module_case(name, {1, 8, 8, 8},
                            [cfg](InitContext& i) { return std::make_unique<NexceptionBlock>("b", 8, 5, cfg, 0.0, i); },
                            seed, 1e-3));
  };
  block("NexceptionBlock", nexception_defaults(), 50);
  ArchConfig alt = nexception_defaults();
  alt.norm = NormKind::kLayer;
  alt.norm_position = NormPosition::kPreBlock;
  alt.act = ActKind::kELU;
  alt.act_position = ActPosition::kPreBlock;
  alt.kernel_middle = 3;
  block("NexceptionBlock pre-block layer norm", alt, 51);
  ArchConfig post = nexception_defaults();
  post.norm_position = NormPosition::kPostBlock;
  post.act_position = ActPosition::kAfterAllConvs;
  post.bottleneck = Bottleneck::kOff;
  block("NexceptionBlock post-block norm", post, 52);
  block("Xception block", xception_config(), 53);
  const ArchConfig d = nexception_defaults();
  c.push_back(module_case("DownsampleBlock blur pool", {1, 4, 8, 8},
                          [d](InitContext& i) { return std::make_unique<DownsampleBlock>("d", 4, 8, 3, d, true, i); },
                          54, 1e-3));
  ArchConfig sc = nexception_defaults();
  sc.pool = PoolKind::kStridedConv;
  sc.se = false;
  c.push_back(module_case("DownsampleBlock strided conv", {1, 4, 8, 8},
                          [sc](InitContext& i) { return std::make_unique<DownsampleBlock>("d", 4, 6, 3, sc, false, i); },
                          55, 1e-3));
  return c;
}

}  // namespace nex::testing
