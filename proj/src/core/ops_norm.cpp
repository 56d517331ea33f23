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

#include "nexception/ops.hpp"
#include "op_support.hpp"

namespace nex {

namespace {

void check_affine(const Tensor& x, const Tensor& p, int64_t c, const char* op, const char* what) {
  if (!p.defined() || p.rank() != 1 || p.dim(0) != c) {
    throw ConfigError(std::string(op) + ": " + what + " must be [" + std::to_string(c) + "] for input " +
                      shape_str(x.shape()));
  }
  detail::require_same_dtype(x, p, op);
}

}  // namespace

Tensor batch_norm(const Tensor& x, BatchNormState& st, bool training) {
  if (x.rank() != 4) throw ConfigError("batch_norm: input must be rank-4, got " + shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const int64_t count = n * plane;
  check_affine(x, st.weight, c, "batch_norm", "weight");
  check_affine(x, st.bias, c, "batch_norm", "bias");
  check_affine(x, st.running_mean, c, "batch_norm", "running_mean");
  check_affine(x, st.running_var, c, "batch_norm", "running_var");
  if (training && count <= 1) {
    throw ConfigError("batch_norm: degenerate statistics, one value per channel for input " +
                      shape_str(x.shape()));
  }
  std::vector<double> mean(static_cast<size_t>(c)), invstd(static_cast<size_t>(c));
  Tensor y = Tensor::zeros(x.shape(), x.dtype());
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    auto xv = x.data<T>();
    auto yv = y.data<T>();
    auto rm = st.running_mean.data<T>();
    auto rv = st.running_var.data<T>();
    auto w = st.weight.data<T>();
    auto b = st.bias.data<T>();
    for (int64_t ch = 0; ch < c; ++ch) {
      double mu, var;
      if (training) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) {
          const T* p = xv.data() + (i * c + ch) * plane;
          for (int64_t k = 0; k < plane; ++k) s += p[k];
        }
        mu = s / static_cast<double>(count);
        double ss = 0.0;
        for (int64_t i = 0; i < n; ++i) {
          const T* p = xv.data() + (i * c + ch) * plane;
          for (int64_t k = 0; k < plane; ++k) ss += (p[k] - mu) * (p[k] - mu);
        }
        var = ss / static_cast<double>(count);
        const double unbiased = ss / static_cast<double>(count - 1);
        rm[ch] = static_cast<T>((1.0 - st.momentum) * rm[ch] + st.momentum * mu);
        rv[ch] = static_cast<T>((1.0 - st.momentum) * rv[ch] + st.momentum * unbiased);
      } else {
        mu = rm[ch];
        var = rv[ch];
      }
      const double is = 1.0 / std::sqrt(var + st.eps);
      mean[ch] = mu;
      invstd[ch] = is;
      for (int64_t i = 0; i < n; ++i) {
        const T* p = xv.data() + (i * c + ch) * plane;
        T* q = yv.data() + (i * c + ch) * plane;
        for (int64_t k = 0; k < plane; ++k) q[k] = static_cast<T>(w[ch] * ((p[k] - mu) * is) + b[ch]);
      }
    }
  });
  detail::check_finite(y, "batch_norm");
  if (detail::wants_grad({&x, &st.weight, &st.bias})) {
    detail::record(y, "batch_norm", {&x, &st.weight, &st.bias},
                   [mean, invstd, training, n, c, plane](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& xv = self.inputs[0]->values<T>();
        const auto& w = self.inputs[1]->values<T>();
        const auto& dy = self.grads<T>();
        T* dx = detail::input_needs_grad(self, 0) ? self.inputs[0]->grads<T>().data() : nullptr;
        T* dw = detail::input_needs_grad(self, 1) ? self.inputs[1]->grads<T>().data() : nullptr;
        T* db = detail::input_needs_grad(self, 2) ? self.inputs[2]->grads<T>().data() : nullptr;
        const double m = static_cast<double>(n * plane);
        for (int64_t ch = 0; ch < c; ++ch) {
          const double mu = mean[ch], is = invstd[ch];
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (int64_t i = 0; i < n; ++i) {
            const size_t off = static_cast<size_t>((i * c + ch) * plane);
            for (int64_t k = 0; k < plane; ++k) {
              const double xhat = (xv[off + k] - mu) * is;
              sum_dy += dy[off + k];
              sum_dy_xhat += dy[off + k] * xhat;
            }
          }
          if (dw) dw[ch] += static_cast<T>(sum_dy_xhat);
          if (db) db[ch] += static_cast<T>(sum_dy);
          if (!dx) continue;
          const double wc = w[ch];
          for (int64_t i = 0; i < n; ++i) {
            const size_t off = static_cast<size_t>((i * c + ch) * plane);
            for (int64_t k = 0; k < plane; ++k) {
              if (training) {
                const double xhat = (xv[off + k] - mu) * is;
                dx[off + k] += static_cast<T>(wc * is * (dy[off + k] - sum_dy / m - xhat * sum_dy_xhat / m));
              } else {
                dx[off + k] += static_cast<T>(wc * is * dy[off + k]);
              }
            }
          }
        }
      });
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& weight, const Tensor& bias, double eps) {
  if (x.rank() != 4) throw ConfigError("layer_norm: input must be rank-4, got " + shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  check_affine(x, weight, c, "layer_norm", "weight");
  check_affine(x, bias, c, "layer_norm", "bias");
  std::vector<double> mean(static_cast<size_t>(n * plane)), invstd(mean.size());
  Tensor y = Tensor::zeros(x.shape(), x.dtype());
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    auto xv = x.data<T>();
    auto yv = y.data<T>();
    auto w = weight.data<T>();
    auto b = bias.data<T>();
    for (int64_t i = 0; i < n; ++i) {
      const T* xi = xv.data() + i * c * plane;
      T* yi = yv.data() + i * c * plane;
      for (int64_t k = 0; k < plane; ++k) {
        double s = 0.0;
        for (int64_t ch = 0; ch < c; ++ch) s += xi[ch * plane + k];
        const double mu = s / static_cast<double>(c);
        double ss = 0.0;
        for (int64_t ch = 0; ch < c; ++ch) ss += (xi[ch * plane + k] - mu) * (xi[ch * plane + k] - mu);
        const double is = 1.0 / std::sqrt(ss / static_cast<double>(c) + eps);
        mean[static_cast<size_t>(i * plane + k)] = mu;
        invstd[static_cast<size_t>(i * plane + k)] = is;
        for (int64_t ch = 0; ch < c; ++ch) {
          yi[ch * plane + k] = static_cast<T>(w[ch] * ((xi[ch * plane + k] - mu) * is) + b[ch]);
        }
      }
    }
  });
  detail::check_finite(y, "layer_norm");
  if (detail::wants_grad({&x, &weight, &bias})) {
    detail::record(y, "layer_norm", {&x, &weight, &bias}, [mean, invstd, n, c, plane](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& xv = self.inputs[0]->values<T>();
        const auto& w = self.inputs[1]->values<T>();
        const auto& dy = self.grads<T>();
        T* dx = detail::input_needs_grad(self, 0) ? self.inputs[0]->grads<T>().data() : nullptr;
        T* dw = detail::input_needs_grad(self, 1) ? self.inputs[1]->grads<T>().data() : nullptr;
        T* db = detail::input_needs_grad(self, 2) ? self.inputs[2]->grads<T>().data() : nullptr;
        const double m = static_cast<double>(c);
        for (int64_t i = 0; i < n; ++i) {
          for (int64_t k = 0; k < plane; ++k) {
            const double mu = mean[static_cast<size_t>(i * plane + k)];
            const double is = invstd[static_cast<size_t>(i * plane + k)];
            double sum_g = 0.0, sum_g_xhat = 0.0;
            for (int64_t ch = 0; ch < c; ++ch) {
              const size_t idx = static_cast<size_t>((i * c + ch) * plane + k);
              const double xhat = (xv[idx] - mu) * is;
              const double g = dy[idx] * w[ch];
              sum_g += g;
              sum_g_xhat += g * xhat;
              if (dw) dw[ch] += static_cast<T>(dy[idx] * xhat);
              if (db) db[ch] += dy[idx];
            }
            if (!dx) continue;
            for (int64_t ch = 0; ch < c; ++ch) {
              const size_t idx = static_cast<size_t>((i * c + ch) * plane + k);
              const double xhat = (xv[idx] - mu) * is;
              dx[idx] += static_cast<T>(is * (dy[idx] * w[ch] - sum_g / m - xhat * sum_g_xhat / m));
            }
          }
        }
      });
    });
  }
  return y;
}

}  // namespace nex
