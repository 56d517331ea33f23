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

// Inner-loop kernels behind the tensor ops. Every kernel has a portable scalar
// reference; float32 additionally has an AVX2/FMA variant chosen at runtime.
// float64 always takes the reference path so gradient checks are not
// affected by vector rounding.

#pragma once

#include <cstdint>

namespace nex::kernels {

enum class Isa { kScalar, kAvx2 };

const char* isa_name(Isa isa);

struct DepthwiseGeometry {
  int64_t channels = 0;
  int64_t in_h = 0, in_w = 0;
  int64_t kernel_h = 0, kernel_w = 0;
  int64_t stride = 1, padding = 0;
  int64_t out_h = 0, out_w = 0;
};

struct KernelTable {
  Isa isa;
  // Row-major C[m,n] = beta * C + op(A) * op(B). op(A) is m x k; when trans_a
  // A is stored k x m. beta == 0 overwrites C without reading it.
  void (*gemm)(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const float* a,
               int64_t lda, const float* b, int64_t ldb, float beta, float* c, int64_t ldc);
  // y[c, oh, ow] = sum_{kh,kw} w[c, kh, kw] * x[c, oh*s+kh-p, ow*s+kw-p]; zero padding.
  void (*depthwise)(const DepthwiseGeometry& g, const float* x, const float* w, float* y);
  // y += alpha * x
  void (*axpy)(int64_t n, float alpha, const float* x, float* y);
  float (*dot)(int64_t n, const float* x, const float* y);
};

const KernelTable& scalar_table();
/// nullptr when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);
/// Best variant the host supports, unless NEX_KERNELS=scalar is set.
Isa detect_best();
const KernelTable& active();
/// Forces a variant; throws ConfigError when the host cannot run it.
void select(Isa isa);

/// Reference implementations, usable for any arithmetic type.
template <typename T>
void gemm_ref(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
              const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (int64_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (int64_t p = 0; p < k; ++p) {
      const T av = trans_a ? a[p * lda + i] : a[i * lda + p];
      if (trans_b) {
        for (int64_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      } else {
        const T* brow = b + p * ldb;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <typename T>
void depthwise_ref(const DepthwiseGeometry& g, const T* x, const T* w, T* y) {
  const int64_t plane = g.in_h * g.in_w;
  const int64_t oplane = g.out_h * g.out_w;
  const int64_t ksz = g.kernel_h * g.kernel_w;
  for (int64_t c = 0; c < g.channels; ++c) {
    const T* xc = x + c * plane;
    const T* wc = w + c * ksz;
    T* yc = y + c * oplane;
    for (int64_t oy = 0; oy < g.out_h; ++oy) {
      for (int64_t ox = 0; ox < g.out_w; ++ox) {
        T acc = T(0);
        for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
          const int64_t iy = oy * g.stride + ky - g.padding;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
            const int64_t ix = ox * g.stride + kx - g.padding;
            if (ix < 0 || ix >= g.in_w) continue;
            acc += wc[ky * g.kernel_w + kx] * xc[iy * g.in_w + ix];
          }
        }
        yc[oy * g.out_w + ox] = acc;
      }
    }
  }
}

/// Typed entry points used by the ops: float goes through the active table,
/// double through the reference.
inline void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const float* a, int64_t lda,
                 const float* b, int64_t ldb, float beta, float* c, int64_t ldc) {
  active().gemm(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}
inline void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
                 const double* b, int64_t ldb, double beta, double* c, int64_t ldc) {
  gemm_ref(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}
inline void depthwise(const DepthwiseGeometry& g, const float* x, const float* w, float* y) {
  active().depthwise(g, x, w, y);
}
inline void depthwise(const DepthwiseGeometry& g, const double* x, const double* w, double* y) {
  depthwise_ref(g, x, w, y);
}
inline float dot(int64_t n, const float* x, const float* y) { return active().dot(n, x, y); }
inline double dot(int64_t n, const double* x, const double* y) {
  double s = 0;
  for (int64_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}
inline void axpy(int64_t n, float alpha, const float* x, float* y) { active().axpy(n, alpha, x, y); }
inline void axpy(int64_t n, double alpha, const double* x, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace nex::kernels
