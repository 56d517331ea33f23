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

#include "nexception/kernels/kernels.hpp"

namespace nex::kernels {

namespace {

void gemm_scalar(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const float* a, int64_t lda,
                 const float* b, int64_t ldb, float beta, float* c, int64_t ldc) {
  gemm_ref(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

void depthwise_scalar(const DepthwiseGeometry& g, const float* x, const float* w, float* y) {
  depthwise_ref(g, x, w, y);
}

void axpy_scalar(int64_t n, float alpha, const float* x, float* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

float dot_scalar(int64_t n, const float* x, const float* y) {
  float acc = 0.0f;
  for (int64_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

constexpr KernelTable kScalar{Isa::kScalar, gemm_scalar, depthwise_scalar, axpy_scalar, dot_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace nex::kernels
