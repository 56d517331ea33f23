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

#include <cmath>
#include <vector>

#include "nexception/kernels/kernels.hpp"
#include "nexception/model.hpp"
#include "support.hpp"

namespace nex {
namespace {

using kernels::Isa;

std::vector<float> random_floats(Rng& rng, size_t n) {
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Float accumulation order differs between variants; bound the gap by the
// magnitude of the sum of absolute products.
bool close(float a, float b, double scale) { return std::abs(double(a) - double(b)) <= 1e-5 * (1.0 + scale); }

const kernels::KernelTable* simd_or_skip() {
  if (!kernels::cpu_supports(Isa::kAvx2)) {
    MESSAGE("AVX2 kernels unavailable on this host; equivalence checks skipped");
    return nullptr;
  }
  return kernels::avx2_table();
}

TEST_CASE("scalar gemm matches the reference") {
  Rng rng(1);
  const auto& s = kernels::scalar_table();
  for (bool ta : {false, true})
    for (bool tb : {false, true})
      for (auto [m, n, k] : {std::tuple{1, 1, 1}, {3, 5, 7}, {17, 9, 33}}) {
        const auto a = random_floats(rng, size_t(m * k)), b = random_floats(rng, size_t(k * n));
        std::vector<float> c1(size_t(m * n), 0.5f), c2 = c1;
        const int64_t lda = ta ? m : k, ldb = tb ? k : n;
        s.gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, 1.0f, c1.data(), n);
        kernels::gemm_ref<float>(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, 1.0f, c2.data(), n);
        for (size_t i = 0; i < c1.size(); ++i) CHECK(close(c1[i], c2[i], k));
      }
}

TEST_CASE("avx2 gemm matches scalar") {
  const auto* v = simd_or_skip();
  if (!v) return;
  const auto& s = kernels::scalar_table();
  Rng rng(2);
  const int sizes[] = {1, 2, 7, 8, 9, 15, 16, 17, 31, 64, 65};
  for (bool ta : {false, true})
    for (bool tb : {false, true})
      for (int m : {1, 5, 16, 33})
        for (int n : sizes)
          for (int k : {1, 3, 8, 27, 100})
            for (float beta : {0.0f, 1.0f, 0.5f}) {
              const auto a = random_floats(rng, size_t(m * k)), b = random_floats(rng, size_t(k * n));
              const int64_t ldc = n + 3;  // non-contiguous rows
              auto c1 = random_floats(rng, size_t(m * ldc));
              auto c2 = c1;
              const int64_t lda = ta ? m : k, ldb = tb ? k : n;
              s.gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, beta, c1.data(), ldc);
              v->gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, beta, c2.data(), ldc);
              bool ok = true;
              for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < ldc; ++j) {
                  const size_t idx = size_t(i * ldc + j);
                  ok &= j < n ? close(c1[idx], c2[idx], k) : c1[idx] == c2[idx];
                }
              INFO("ta=" << ta << " tb=" << tb << " m=" << m << " n=" << n << " k=" << k << " beta=" << beta);
              CHECK(ok);
            }
}

TEST_CASE("avx2 depthwise matches scalar") {
  const auto* v = simd_or_skip();
  if (!v) return;
  const auto& s = kernels::scalar_table();
  Rng rng(3);
  for (int64_t k : {1, 3, 5, 7, 9})
    for (int64_t stride : {1, 2})
      for (int64_t hw : {1, 4, 7, 8, 13, 16, 19, 32})
        for (int64_t pad : {int64_t(0), (k - 1) / 2}) {
          if (hw + 2 * pad < k) continue;
          kernels::DepthwiseGeometry g;
          g.channels = 3;
          g.in_h = hw;
          g.in_w = hw + 1;
          g.kernel_h = g.kernel_w = k;
          g.stride = stride;
          g.padding = pad;
          g.out_h = conv_out_extent(g.in_h, k, stride, pad);
          g.out_w = conv_out_extent(g.in_w, k, stride, pad);
          const auto x = random_floats(rng, size_t(g.channels * g.in_h * g.in_w));
          const auto w = random_floats(rng, size_t(g.channels * k * k));
          std::vector<float> y1(size_t(g.channels * g.out_h * g.out_w)), y2(y1.size());
          s.depthwise(g, x.data(), w.data(), y1.data());
          v->depthwise(g, x.data(), w.data(), y2.data());
          bool ok = true;
          for (size_t i = 0; i < y1.size(); ++i) ok &= close(y1[i], y2[i], double(k * k));
          INFO("k=" << k << " stride=" << stride << " hw=" << hw << " pad=" << pad);
          CHECK(ok);
        }
}

TEST_CASE("avx2 dot and axpy match scalar") {
  const auto* v = simd_or_skip();
  if (!v) return;
  const auto& s = kernels::scalar_table();
  Rng rng(4);
  for (int64_t n : {0, 1, 7, 8, 9, 31, 32, 33, 1000}) {
    const auto x = random_floats(rng, size_t(n)), y = random_floats(rng, size_t(n));
    CHECK(close(s.dot(n, x.data(), y.data()), v->dot(n, x.data(), y.data()), double(n)));
    auto y1 = y, y2 = y;
    s.axpy(n, 0.37f, x.data(), y1.data());
    v->axpy(n, 0.37f, x.data(), y2.data());
    for (int64_t i = 0; i < n; ++i) CHECK(close(y1[size_t(i)], y2[size_t(i)], 1.0));
  }
}

TEST_CASE("a whole network agrees across kernel variants") {
  if (!simd_or_skip()) return;
  auto run = [](Isa isa) {
    kernels::select(isa);
    ModelOptions mo;
    mo.num_classes = 10;
    auto m = build_variant("reduced_nas", mo);
    Rng rng(5);
    Tensor x = Tensor::randn({2, 3, 32, 32}, rng);
    ForwardContext ctx;
    ctx.training = true;
    Tensor loss = sum(square(m->forward(x, ctx)));
    backward(loss);
    std::vector<double> out{loss.item()};
    for (Parameter* p : m->parameters()) {
      if (p->trainable) {
        const auto g = p->value.grad_vector();
        out.insert(out.end(), g.begin(), g.end());
      }
    }
    return out;
  };
  const Isa before = kernels::active().isa;
  const auto a = run(Isa::kScalar), b = run(Isa::kAvx2);
  kernels::select(before);
  REQUIRE(a.size() == b.size());
  double worst = 0, mag = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
    mag = std::max(mag, std::abs(a[i]));
  }
  CHECK(worst <= 1e-3 * mag);
}

TEST_CASE("kernel selection") {
  CHECK(std::string(kernels::isa_name(Isa::kScalar)) == "scalar");
  const Isa before = kernels::active().isa;
  kernels::select(Isa::kScalar);
  CHECK(kernels::active().isa == Isa::kScalar);
  if (!kernels::cpu_supports(Isa::kAvx2)) CHECK_THROWS_AS(kernels::select(Isa::kAvx2), ConfigError);
  kernels::select(before);
}

}  // namespace
}  // namespace nex
