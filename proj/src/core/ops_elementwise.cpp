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
#include <numbers>

#include "nexception/ops.hpp"
#include "op_support.hpp"

namespace nex {

namespace {

// y = f(x); dx += dy * df(x, y).
template <typename F, typename DF>
Tensor unary(const Tensor& x, const char* op, F f, DF df) {
  Tensor y = Tensor::zeros(x.shape(), x.dtype());
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    auto xs = x.data<T>();
    auto ys = y.data<T>();
    for (size_t i = 0; i < xs.size(); ++i) ys[i] = static_cast<T>(f(xs[i]));
  });
  detail::check_finite(y, op);
  if (detail::wants_grad({&x})) {
    detail::record(y, op, {&x}, [df](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& xs = self.inputs[0]->values<T>();
        const auto& ys = self.values<T>();
        const auto& dy = self.grads<T>();
        auto& dx = self.inputs[0]->grads<T>();
        for (size_t i = 0; i < xs.size(); ++i) {
          dx[i] += dy[i] * static_cast<T>(df(xs[i], ys[i]));
        }
      });
    });
  }
  return y;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  detail::require_same_dtype(a, b, op);
}

}  // namespace

const char* act_name(ActKind kind) {
  switch (kind) {
    case ActKind::kReLU: return "relu";
    case ActKind::kGELU: return "gelu";
    case ActKind::kELU: return "elu";
    case ActKind::kCELU: return "celu";
  }
  return "?";
}

ActKind parse_act(const std::string& name) {
  if (name == "relu") return ActKind::kReLU;
  if (name == "gelu") return ActKind::kGELU;
  if (name == "elu") return ActKind::kELU;
  if (name == "celu") return ActKind::kCELU;
  throw ConfigError("unknown activation '" + name + "' (expected relu, gelu, elu, celu)");
}

// The elementwise functors are generic so float tensors use the float libm
// routines; float64 keeps full precision for the gradient checks.
Tensor activation(const Tensor& x, ActKind kind) {
  switch (kind) {
    case ActKind::kReLU:
      return unary(
          x, "relu", [](auto v) { return v > 0 ? v : decltype(v)(0); },
          [](auto v, auto) { return v > 0 ? decltype(v)(1) : decltype(v)(0); });
    case ActKind::kGELU:
      return unary(
          x, "gelu",
          [](auto v) {
            using V = decltype(v);
            return V(0.5) * v * (V(1) + std::erf(v * V(std::numbers::sqrt2 / 2.0)));
          },
          [](auto v, auto) {
            using V = decltype(v);
            const V cdf = V(0.5) * (V(1) + std::erf(v * V(std::numbers::sqrt2 / 2.0)));
            const V pdf = std::exp(V(-0.5) * v * v) * V(1.0 / std::sqrt(2.0 * std::numbers::pi));
            return cdf + v * pdf;
          });
    case ActKind::kELU:
      return unary(
          x, "elu", [](auto v) { return v > 0 ? v : std::expm1(v); },
          [](auto v, auto) { return v > 0 ? decltype(v)(1) : std::exp(v); });
    case ActKind::kCELU:
      // alpha = 1: max(0, x) + min(0, exp(x) - 1)
      return unary(
          x, "celu",
          [](auto v) {
            using V = decltype(v);
            return std::max(V(0), v) + std::min(V(0), std::expm1(v));
          },
          [](auto v, auto) { return v > 0 ? decltype(v)(1) : std::exp(v); });
  }
  throw ConfigError("activation: bad kind");
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](auto v) {
        using V = decltype(v);
        return v >= 0 ? V(1) / (V(1) + std::exp(-v)) : std::exp(v) / (V(1) + std::exp(v));
      },
      [](auto, auto y) { return y * (decltype(y)(1) - y); });
}

Tensor square(const Tensor& x) {
  return unary(x, "square", [](auto v) { return v * v; }, [](auto v, auto) { return decltype(v)(2) * v; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](auto v) { return static_cast<decltype(v)>(v * factor); },
      [factor](auto v, auto) { return static_cast<decltype(v)>(factor); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor y = Tensor::zeros(a.shape(), a.dtype());
  dispatch_dtype(a.dtype(), [&]<typename T>() {
    auto av = a.data<T>(), bv = b.data<T>(), yv = y.data<T>();
    for (size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] + bv[i];
  });
  detail::check_finite(y, "add");
  if (detail::wants_grad({&a, &b})) {
    detail::record(y, "add", {&a, &b}, [](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& dy = self.grads<T>();
        for (size_t k = 0; k < 2; ++k) {
          if (!detail::input_needs_grad(self, k)) continue;
          auto& d = self.inputs[k]->grads<T>();
          for (size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
        }
      });
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor y = Tensor::zeros(a.shape(), a.dtype());
  dispatch_dtype(a.dtype(), [&]<typename T>() {
    auto av = a.data<T>(), bv = b.data<T>(), yv = y.data<T>();
    for (size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] * bv[i];
  });
  detail::check_finite(y, "mul");
  if (detail::wants_grad({&a, &b})) {
    detail::record(y, "mul", {&a, &b}, [](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& dy = self.grads<T>();
        const auto& av = self.inputs[0]->values<T>();
        const auto& bv = self.inputs[1]->values<T>();
        if (detail::input_needs_grad(self, 0)) {
          auto& d = self.inputs[0]->grads<T>();
          for (size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * bv[i];
        }
        if (detail::input_needs_grad(self, 1)) {
          auto& d = self.inputs[1]->grads<T>();
          for (size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * av[i];
        }
      });
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  Tensor y = Tensor::zeros({1}, x.dtype());
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    T s = T(0);
    for (T v : x.data<T>()) s += v;
    y.data<T>()[0] = s;
  });
  detail::check_finite(y, "sum");
  if (detail::wants_grad({&x})) {
    detail::record(y, "sum", {&x}, [](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const T g = self.grads<T>()[0];
        for (auto& d : self.inputs[0]->grads<T>()) d += g;
      });
    });
  }
  return y;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ConfigError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ConfigError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tensor y = Tensor::zeros(shape, x.dtype());
  y.node().data = x.node().data;
  if (detail::wants_grad({&x})) {
    detail::record(y, "reshape", {&x}, [](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& dy = self.grads<T>();
        auto& dx = self.inputs[0]->grads<T>();
        for (size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      });
    });
  }
  return y;
}

Tensor channel_scale(const Tensor& x, const Tensor& gate) {
  if (x.rank() != 4 || gate.rank() != 2 || gate.dim(0) != x.dim(0) || gate.dim(1) != x.dim(1)) {
    throw ConfigError("channel_scale: input " + shape_str(x.shape()) + " with gate " + shape_str(gate.shape()));
  }
  detail::require_same_dtype(x, gate, "channel_scale");
  const int64_t nc = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor y = Tensor::zeros(x.shape(), x.dtype());
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    auto xv = x.data<T>(), gv = gate.data<T>(), yv = y.data<T>();
    for (int64_t i = 0; i < nc; ++i) {
      for (int64_t p = 0; p < plane; ++p) yv[i * plane + p] = xv[i * plane + p] * gv[i];
    }
  });
  detail::check_finite(y, "channel_scale");
  if (detail::wants_grad({&x, &gate})) {
    detail::record(y, "channel_scale", {&x, &gate}, [nc, plane](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& dy = self.grads<T>();
        const auto& xv = self.inputs[0]->values<T>();
        const auto& gv = self.inputs[1]->values<T>();
        const bool need_x = detail::input_needs_grad(self, 0), need_g = detail::input_needs_grad(self, 1);
        T* dx = need_x ? self.inputs[0]->grads<T>().data() : nullptr;
        T* dg = need_g ? self.inputs[1]->grads<T>().data() : nullptr;
        for (int64_t i = 0; i < nc; ++i) {
          T acc = T(0);
          for (int64_t p = 0; p < plane; ++p) {
            const T d = dy[i * plane + p];
            if (dx) dx[i * plane + p] += d * gv[i];
            acc += d * xv[i * plane + p];
          }
          if (dg) dg[i] += acc;
        }
      });
    });
  }
  return y;
}

Tensor sample_scale(const Tensor& x, std::span<const double> factors) {
  if (x.rank() < 1 || static_cast<int64_t>(factors.size()) != x.dim(0)) {
    throw ConfigError("sample_scale: " + std::to_string(factors.size()) + " factors for " + shape_str(x.shape()));
  }
  const int64_t per = x.numel() / x.dim(0);
  std::vector<double> f(factors.begin(), factors.end());
  Tensor y = Tensor::zeros(x.shape(), x.dtype());
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    auto xv = x.data<T>(), yv = y.data<T>();
    for (size_t n = 0; n < f.size(); ++n) {
      for (int64_t i = 0; i < per; ++i) yv[n * per + i] = xv[n * per + i] * static_cast<T>(f[n]);
    }
  });
  detail::check_finite(y, "sample_scale");
  if (detail::wants_grad({&x})) {
    detail::record(y, "sample_scale", {&x}, [f, per](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const auto& dy = self.grads<T>();
        auto& dx = self.inputs[0]->grads<T>();
        for (size_t n = 0; n < f.size(); ++n) {
          for (int64_t i = 0; i < per; ++i) dx[n * per + i] += dy[n * per + i] * static_cast<T>(f[n]);
        }
      });
    });
  }
  return y;
}

}  // namespace nex
