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
#include <cmath>
#include <limits>
#include <vector>

#include "nexception/ops.hpp"
#include "op_support.hpp"

namespace nex {

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) throw ConfigError("global_avg_pool: input must be rank-4, got " + shape_str(x.shape()));
  const int64_t nc = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
  if (plane == 0) throw ConfigError("global_avg_pool: empty spatial extent");
  Tensor y = Tensor::zeros({x.dim(0), x.dim(1)}, x.dtype());
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    auto xv = x.data<T>();
    auto yv = y.data<T>();
    for (int64_t i = 0; i < nc; ++i) {
      double s = 0.0;
      for (int64_t k = 0; k < plane; ++k) s += xv[i * plane + k];
      yv[i] = static_cast<T>(s / static_cast<double>(plane));
    }
  });
  detail::check_finite(y, "global_avg_pool");
  if (detail::wants_grad({&x})) {
    detail::record(y, "global_avg_pool", {&x}, [nc, plane](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& dy = self.grads<T>();
        auto& dx = self.inputs[0]->grads<T>();
        const T inv = T(1) / static_cast<T>(plane);
        for (int64_t i = 0; i < nc; ++i) {
          for (int64_t k = 0; k < plane; ++k) dx[i * plane + k] += dy[i] * inv;
        }
      });
    });
  }
  return y;
}

Tensor max_pool2d(const Tensor& x, int64_t kernel, int64_t stride, int64_t padding) {
  if (x.rank() != 4) throw ConfigError("max_pool2d: input must be rank-4, got " + shape_str(x.shape()));
  if (kernel <= 0 || padding < 0 || padding >= kernel) {
    throw ConfigError("max_pool2d: kernel " + std::to_string(kernel) + " with padding " + std::to_string(padding));
  }
  const int64_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t oh = conv_out_extent(h, kernel, stride, padding);
  const int64_t ow = conv_out_extent(w, kernel, stride, padding);
  Tensor y = Tensor::zeros({x.dim(0), x.dim(1), oh, ow}, x.dtype());
  std::vector<int64_t> argmax(static_cast<size_t>(nc * oh * ow));
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    auto xv = x.data<T>();
    auto yv = y.data<T>();
    for (int64_t i = 0; i < nc; ++i) {
      const T* xp = xv.data() + i * h * w;
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox) {
          T best = -std::numeric_limits<T>::infinity();
          int64_t best_idx = -1;
          for (int64_t ky = 0; ky < kernel; ++ky) {
            const int64_t iy = oy * stride + ky - padding;
            if (iy < 0 || iy >= h) continue;
            for (int64_t kx = 0; kx < kernel; ++kx) {
              const int64_t ix = ox * stride + kx - padding;
              if (ix < 0 || ix >= w) continue;
              const T v = xp[iy * w + ix];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = iy * w + ix;
              }
            }
          }
          const size_t o = static_cast<size_t>((i * oh + oy) * ow + ox);
          yv[o] = best;
          argmax[o] = best_idx;
        }
      }
    }
  });
  detail::check_finite(y, "max_pool2d");
  if (detail::wants_grad({&x})) {
    detail::record(y, "max_pool2d", {&x}, [argmax = std::move(argmax), nc, h, w, oh, ow](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& dy = self.grads<T>();
        auto& dx = self.inputs[0]->grads<T>();
        for (int64_t i = 0; i < nc; ++i) {
          for (int64_t o = 0; o < oh * ow; ++o) {
            const size_t idx = static_cast<size_t>(i * oh * ow + o);
            dx[static_cast<size_t>(i * h * w + argmax[idx])] += dy[idx];
          }
        }
      });
    });
  }
  return y;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    throw ConfigError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs targets " +
                      shape_str(targets.shape()));
  }
  detail::require_same_dtype(logits, targets, "bce_with_logits");
  const int64_t count = logits.numel();
  if (count == 0) throw ConfigError("bce_with_logits: empty input");
  Tensor y = Tensor::zeros({1}, logits.dtype());
  dispatch_dtype(logits.dtype(), [&]<typename T>() {
    auto z = logits.data<T>();
    auto t = targets.data<T>();
    double s = 0.0;
    for (int64_t i = 0; i < count; ++i) {
      if (!(t[i] >= T(0) && t[i] <= T(1))) {
        throw ConfigError("bce_with_logits: target " + std::to_string(static_cast<double>(t[i])) +
                          " outside [0, 1] at index " + std::to_string(i));
      }
      const double zv = z[i];
      s += std::max(zv, 0.0) - zv * t[i] + std::log1p(std::exp(-std::abs(zv)));
    }
    y.data<T>()[0] = static_cast<T>(s / static_cast<double>(count));
  });
  detail::check_finite(y, "bce_with_logits");
  if (detail::wants_grad({&logits})) {
    detail::record(y, "bce_with_logits", {&logits, &targets}, [count](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const double g = self.grads<T>()[0] / static_cast<double>(count);
        const auto& z = self.inputs[0]->values<T>();
        const auto& t = self.inputs[1]->values<T>();
        auto& dz = self.inputs[0]->grads<T>();
        for (int64_t i = 0; i < count; ++i) {
          const double zv = z[i];
          const double sig = zv >= 0.0 ? 1.0 / (1.0 + std::exp(-zv)) : std::exp(zv) / (1.0 + std::exp(zv));
          dz[i] += static_cast<T>(g * (sig - t[i]));
        }
      });
    });
  }
  return y;
}

Tensor soft_cross_entropy(const Tensor& logits, const Tensor& targets) {
  if (logits.rank() != 2 || logits.shape() != targets.shape()) {
    throw ConfigError("soft_cross_entropy: logits " + shape_str(logits.shape()) + " vs targets " +
                      shape_str(targets.shape()));
  }
  detail::require_same_dtype(logits, targets, "soft_cross_entropy");
  const int64_t n = logits.dim(0), k = logits.dim(1);
  if (n == 0) throw ConfigError("soft_cross_entropy: empty batch");
  std::vector<double> probs(static_cast<size_t>(n * k));
  Tensor y = Tensor::zeros({1}, logits.dtype());
  dispatch_dtype(logits.dtype(), [&]<typename T>() {
    auto z = logits.data<T>();
    auto t = targets.data<T>();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(z[i * k + j]));
      double se = 0.0;
      for (int64_t j = 0; j < k; ++j) se += std::exp(z[i * k + j] - mx);
      const double lse = mx + std::log(se);
      for (int64_t j = 0; j < k; ++j) {
        const double logp = z[i * k + j] - lse;
        probs[static_cast<size_t>(i * k + j)] = std::exp(logp);
        total -= t[i * k + j] * logp;
      }
    }
    y.data<T>()[0] = static_cast<T>(total / static_cast<double>(n));
  });
  detail::check_finite(y, "soft_cross_entropy");
  if (detail::wants_grad({&logits})) {
    detail::record(y, "soft_cross_entropy", {&logits, &targets}, [probs = std::move(probs), n, k](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const double g = self.grads<T>()[0] / static_cast<double>(n);
        const auto& t = self.inputs[1]->values<T>();
        auto& dz = self.inputs[0]->grads<T>();
        for (int64_t i = 0; i < n; ++i) {
          double mass = 0.0;
          for (int64_t j = 0; j < k; ++j) mass += t[i * k + j];
          for (int64_t j = 0; j < k; ++j) {
            const size_t idx = static_cast<size_t>(i * k + j);
            dz[idx] += static_cast<T>(g * (probs[idx] * mass - t[idx]));
          }
        }
      });
    });
  }
  return y;
}

}  // namespace nex
