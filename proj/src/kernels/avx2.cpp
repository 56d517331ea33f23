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
// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "nexception/kernels/kernels.hpp"

namespace nex::kernels {

namespace {

constexpr int64_t kBlockK = 256;

void scale_rows(int64_t m, int64_t n, float beta, float* c, int64_t ldc) {
  if (beta == 1.0f) return;
  for (int64_t i = 0; i < m; ++i) {
    float* row = c + i * ldc;
    if (beta == 0.0f) {
      std::fill(row, row + n, 0.0f);
    } else {
      for (int64_t j = 0; j < n; ++j) row[j] *= beta;
    }
  }
}

inline void tile_4x16(int64_t kc, const float* a, int64_t lda, const float* b, int64_t ldb, float* c,
                      int64_t ldc) {
  __m256 c00 = _mm256_loadu_ps(c), c01 = _mm256_loadu_ps(c + 8);
  __m256 c10 = _mm256_loadu_ps(c + ldc), c11 = _mm256_loadu_ps(c + ldc + 8);
  __m256 c20 = _mm256_loadu_ps(c + 2 * ldc), c21 = _mm256_loadu_ps(c + 2 * ldc + 8);
  __m256 c30 = _mm256_loadu_ps(c + 3 * ldc), c31 = _mm256_loadu_ps(c + 3 * ldc + 8);
  for (int64_t p = 0; p < kc; ++p) {
    const float* brow = b + p * ldb;
    const __m256 b0 = _mm256_loadu_ps(brow), b1 = _mm256_loadu_ps(brow + 8);
    __m256 av = _mm256_broadcast_ss(a + p);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(a + lda + p);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(a + 2 * lda + p);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(a + 3 * lda + p);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
  }
  _mm256_storeu_ps(c, c00);
  _mm256_storeu_ps(c + 8, c01);
  _mm256_storeu_ps(c + ldc, c10);
  _mm256_storeu_ps(c + ldc + 8, c11);
  _mm256_storeu_ps(c + 2 * ldc, c20);
  _mm256_storeu_ps(c + 2 * ldc + 8, c21);
  _mm256_storeu_ps(c + 3 * ldc, c30);
  _mm256_storeu_ps(c + 3 * ldc + 8, c31);
}

inline void row_tail(int64_t kc, const float* a, const float* b, int64_t ldb, float* c, int64_t j0,
                     int64_t n) {
  int64_t j = j0;
  for (; j + 8 <= n; j += 8) {
    __m256 acc = _mm256_loadu_ps(c + j);
    for (int64_t p = 0; p < kc; ++p) {
      acc = _mm256_fmadd_ps(_mm256_broadcast_ss(a + p), _mm256_loadu_ps(b + p * ldb + j), acc);
    }
    _mm256_storeu_ps(c + j, acc);
  }
  for (; j < n; ++j) {
    float acc = c[j];
    for (int64_t p = 0; p < kc; ++p) acc += a[p] * b[p * ldb + j];
    c[j] = acc;
  }
}

void gemm_nn(int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b, int64_t ldb,
             float* c, int64_t ldc) {
  for (int64_t p0 = 0; p0 < k; p0 += kBlockK) {
    const int64_t kc = std::min(kBlockK, k - p0);
    const float* bp = b + p0 * ldb;
    int64_t i = 0;
    for (; i + 4 <= m; i += 4) {
      const float* ap = a + i * lda + p0;
      float* cp = c + i * ldc;
      int64_t j = 0;
      for (; j + 16 <= n; j += 16) tile_4x16(kc, ap, lda, bp + j, ldb, cp + j, ldc);
      if (j < n) {
        for (int r = 0; r < 4; ++r) row_tail(kc, ap + r * lda, bp, ldb, cp + r * ldc, j, n);
      }
    }
    for (; i < m; ++i) row_tail(kc, a + i * lda + p0, bp, ldb, c + i * ldc, 0, n);
  }
}

void transpose_into(std::vector<float>& dst, const float* src, int64_t rows, int64_t cols, int64_t ld) {
  // src is rows x cols with leading dimension ld; dst becomes cols x rows.
  dst.resize(static_cast<size_t>(rows * cols));
  constexpr int64_t kTile = 32;
  for (int64_t r0 = 0; r0 < rows; r0 += kTile) {
    for (int64_t c0 = 0; c0 < cols; c0 += kTile) {
      const int64_t r1 = std::min(rows, r0 + kTile), c1 = std::min(cols, c0 + kTile);
      for (int64_t r = r0; r < r1; ++r) {
        for (int64_t cc = c0; cc < c1; ++cc) dst[static_cast<size_t>(cc * rows + r)] = src[r * ld + cc];
      }
    }
  }
}

void gemm_avx2(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const float* a, int64_t lda,
               const float* b, int64_t ldb, float beta, float* c, int64_t ldc) {
  thread_local std::vector<float> a_pack, b_pack;
  scale_rows(m, n, beta, c, ldc);
  if (m == 0 || n == 0 || k == 0) return;
  if (ta) {
    transpose_into(a_pack, a, k, m, lda);
    a = a_pack.data();
    lda = k;
  }
  if (tb) {
    transpose_into(b_pack, b, n, k, ldb);
    b = b_pack.data();
    ldb = n;
  }
  gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
}

void depthwise_avx2(const DepthwiseGeometry& g, const float* x, const float* w, float* y) {
  if (g.stride != 1) {
    depthwise_ref(g, x, w, y);
    return;
  }
  thread_local std::vector<float> padded;
  const int64_t ph = g.in_h + 2 * g.padding, pw = g.in_w + 2 * g.padding;
  padded.assign(static_cast<size_t>(ph * pw), 0.0f);
  const int64_t ksz = g.kernel_h * g.kernel_w;
  for (int64_t c = 0; c < g.channels; ++c) {
    const float* xc = x + c * g.in_h * g.in_w;
    for (int64_t r = 0; r < g.in_h; ++r) {
      std::copy(xc + r * g.in_w, xc + (r + 1) * g.in_w,
                padded.begin() + (r + g.padding) * pw + g.padding);
    }
    const float* wc = w + c * ksz;
    float* yc = y + c * g.out_h * g.out_w;
    for (int64_t oy = 0; oy < g.out_h; ++oy) {
      float* yrow = yc + oy * g.out_w;
      int64_t ox = 0;
      for (; ox + 8 <= g.out_w; ox += 8) {
        __m256 acc = _mm256_setzero_ps();
        for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
          const float* prow = padded.data() + (oy + ky) * pw + ox;
          for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
            acc = _mm256_fmadd_ps(_mm256_set1_ps(wc[ky * g.kernel_w + kx]), _mm256_loadu_ps(prow + kx), acc);
          }
        }
        _mm256_storeu_ps(yrow + ox, acc);
      }
      for (; ox < g.out_w; ++ox) {
        float acc = 0.0f;
        for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
          const float* prow = padded.data() + (oy + ky) * pw + ox;
          for (int64_t kx = 0; kx < g.kernel_w; ++kx) acc += wc[ky * g.kernel_w + kx] * prow[kx];
        }
        yrow[ox] = acc;
      }
    }
  }
}

void axpy_avx2(int64_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

float dot_avx2(int64_t n, const float* x, const float* y) {
  __m256 acc = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
  alignas(32) float lanes[8];
  _mm256_store_ps(lanes, acc);
  float s = 0.0f;
  for (float v : lanes) s += v;
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

constexpr KernelTable kAvx2{Isa::kAvx2, gemm_avx2, depthwise_avx2, axpy_avx2, dot_avx2};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2; }

}  // namespace nex::kernels
