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
#include <vector>

#include <algorithm>
#include <vector>

#include "nexception/kernels/kernels.hpp"
#include "nexception/ops.hpp"
#include "op_support.hpp"

namespace nex {

int64_t conv_out_extent(int64_t in, int64_t kernel, int64_t stride, int64_t padding) {
  if (stride <= 0) throw ConfigError("stride must be positive, got " + std::to_string(stride));
  if (in + 2 * padding < kernel) {
    throw ConfigError("window " + std::to_string(kernel) + " larger than padded extent " +
                      std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  int64_t n, cin, h, w, cout, kh, kw, oh, ow, stride, pad, groups;
  int64_t cin_g() const { return cin / groups; }
  int64_t cout_g() const { return cout / groups; }
  int64_t patch() const { return cin_g() * kh * kw; }
  int64_t out_plane() const { return oh * ow; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
  bool depthwise() const { return groups == cin && cout == cin && groups > 1; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const int64_t ohw = g.out_plane();
  for (int64_t c = 0; c < g.cin_g(); ++c) {
    const T* xc = x + c * g.h * g.w;
    for (int64_t ky = 0; ky < g.kh; ++ky) {
      for (int64_t kx = 0; kx < g.kw; ++kx) {
        T* row = cols + ((c * g.kh + ky) * g.kw + kx) * ohw;
        for (int64_t oy = 0; oy < g.oh; ++oy) {
          const int64_t iy = oy * g.stride + ky - g.pad;
          T* dst = row + oy * g.ow;
          if (iy < 0 || iy >= g.h) {
            for (int64_t ox = 0; ox < g.ow; ++ox) dst[ox] = T(0);
            continue;
          }
          const T* src = xc + iy * g.w;
          for (int64_t ox = 0; ox < g.ow; ++ox) {
            const int64_t ix = ox * g.stride + kx - g.pad;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx) {
  const int64_t ohw = g.out_plane();
  for (int64_t c = 0; c < g.cin_g(); ++c) {
    T* xc = dx + c * g.h * g.w;
    for (int64_t ky = 0; ky < g.kh; ++ky) {
      for (int64_t kx = 0; kx < g.kw; ++kx) {
        const T* row = cols + ((c * g.kh + ky) * g.kw + kx) * ohw;
        for (int64_t oy = 0; oy < g.oh; ++oy) {
          const int64_t iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          for (int64_t ox = 0; ox < g.ow; ++ox) {
            const int64_t ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.w) xc[iy * g.w + ix] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

// Output index range [lo, hi) whose window tap k lands inside [0, extent).
inline std::pair<int64_t, int64_t> valid_outputs(int64_t k, int64_t pad, int64_t stride, int64_t extent, int64_t out) {
  int64_t lo = 0;
  if (pad > k) lo = (pad - k + stride - 1) / stride;
  const int64_t last = extent - 1 + pad - k;
  const int64_t hi = last < 0 ? 0 : std::min(out, last / stride + 1);
  return {std::min(lo, hi), hi};
}

template <typename T>
void depthwise_backward_generic(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw) {
  const int64_t ksz = g.kh * g.kw;
  std::vector<T> acc(static_cast<size_t>(g.ow));
  for (int64_t c = 0; c < g.cin; ++c) {
    const T* xc = x + c * g.h * g.w;
    const T* wc = w + c * ksz;
    const T* dyc = dy + c * g.out_plane();
    T* dxc = dx ? dx + c * g.h * g.w : nullptr;
    T* dwc = dw ? dw + c * ksz : nullptr;
    for (int64_t ky = 0; ky < g.kh; ++ky) {
      const auto [oy0, oy1] = valid_outputs(ky, g.pad, g.stride, g.h, g.oh);
      for (int64_t kx = 0; kx < g.kw; ++kx) {
        const auto [ox0, ox1] = valid_outputs(kx, g.pad, g.stride, g.w, g.ow);
        const T wv = wc[ky * g.kw + kx];
        std::fill(acc.begin(), acc.end(), T(0));
        for (int64_t oy = oy0; oy < oy1; ++oy) {
          const int64_t iy = oy * g.stride + ky - g.pad;
          const T* drow = dyc + oy * g.ow;
          const T* xrow = xc + iy * g.w + kx - g.pad;
          if (g.stride == 1) {
            if (dwc) {
              for (int64_t ox = ox0; ox < ox1; ++ox) acc[static_cast<size_t>(ox)] += drow[ox] * xrow[ox];
            }
            if (dxc) {
              T* dxrow = dxc + iy * g.w + kx - g.pad;
              for (int64_t ox = ox0; ox < ox1; ++ox) dxrow[ox] += drow[ox] * wv;
            }
          } else {
            for (int64_t ox = ox0; ox < ox1; ++ox) {
              const int64_t ix = ox * g.stride;
              if (dwc) acc[static_cast<size_t>(ox)] += drow[ox] * xrow[ix];
              if (dxc) dxc[iy * g.w + kx - g.pad + ix] += drow[ox] * wv;
            }
          }
        }
        if (dwc) {
          T s = T(0);
          for (T v : acc) s += v;
          dwc[ky * g.kw + kx] += s;
        }
      }
    }
  }
}

// Stride-1 square kernels: dx is a depthwise correlation of dy with the
// flipped kernel, dw a dot product of dy with each shifted input window.
template <typename T>
void depthwise_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw) {
  if (g.stride != 1 || g.kh != g.kw || g.pad > g.kh - 1) {
    depthwise_backward_generic(g, x, w, dy, dx, dw);
    return;
  }
  const int64_t k = g.kh, ksz = k * k, ohw = g.out_plane();
  if (dx) {
    std::vector<T> flipped(static_cast<size_t>(g.cin * ksz));
    for (int64_t c = 0; c < g.cin; ++c) {
      for (int64_t i = 0; i < ksz; ++i) flipped[static_cast<size_t>(c * ksz + i)] = w[c * ksz + ksz - 1 - i];
    }
    std::vector<T> tmp(static_cast<size_t>(g.cin * g.h * g.w));
    const kernels::DepthwiseGeometry tg{g.cin, g.oh, g.ow, k, k, 1, k - 1 - g.pad, g.h, g.w};
    kernels::depthwise(tg, dy, flipped.data(), tmp.data());
    kernels::axpy(static_cast<int64_t>(tmp.size()), T(1), tmp.data(), dx);
  }
  if (dw) {
    const int64_t hp = g.h + 2 * g.pad, wp = g.w + 2 * g.pad;
    std::vector<T> padded(static_cast<size_t>(hp * wp), T(0));
    std::vector<T> window(static_cast<size_t>(ohw));
    for (int64_t c = 0; c < g.cin; ++c) {
      const T* xc = x + c * g.h * g.w;
      for (int64_t y = 0; y < g.h; ++y) {
        std::copy(xc + y * g.w, xc + (y + 1) * g.w, padded.begin() + (y + g.pad) * wp + g.pad);
      }
      const T* dyc = dy + c * ohw;
      for (int64_t ky = 0; ky < k; ++ky) {
        for (int64_t kx = 0; kx < k; ++kx) {
          for (int64_t oy = 0; oy < g.oh; ++oy) {
            const T* src = padded.data() + (oy + ky) * wp + kx;
            std::copy(src, src + g.ow, window.begin() + oy * g.ow);
          }
          dw[c * ksz + ky * k + kx] += kernels::dot(ohw, dyc, window.data());
        }
      }
    }
  }
}

template <typename T>
void conv_forward(const ConvGeometry& g, const T* x, const T* w, const T* b, T* y) {
  const int64_t ohw = g.out_plane();
  const kernels::DepthwiseGeometry dg{g.cin, g.h, g.w, g.kh, g.kw, g.stride, g.pad, g.oh, g.ow};
  std::vector<T> cols;
  if (!g.depthwise() && !g.pointwise()) cols.resize(static_cast<size_t>(g.patch() * ohw));
  for (int64_t n = 0; n < g.n; ++n) {
    const T* xn = x + n * g.cin * g.h * g.w;
    T* yn = y + n * g.cout * ohw;
    if (g.depthwise()) {
      kernels::depthwise(dg, xn, w, yn);
    } else {
      for (int64_t grp = 0; grp < g.groups; ++grp) {
        const T* xg = xn + grp * g.cin_g() * g.h * g.w;
        const T* src = xg;
        if (!g.pointwise()) {
          im2col(xg, g, cols.data());
          src = cols.data();
        }
        kernels::gemm(false, false, g.cout_g(), ohw, g.patch(), w + grp * g.cout_g() * g.patch(), g.patch(),
                      src, ohw, T(0), yn + grp * g.cout_g() * ohw, ohw);
      }
    }
    if (b) {
      for (int64_t c = 0; c < g.cout; ++c) {
        T* yc = yn + c * ohw;
        for (int64_t i = 0; i < ohw; ++i) yc[i] += b[c];
      }
    }
  }
}

template <typename T>
void conv_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const int64_t ohw = g.out_plane();
  std::vector<T> cols, dcols;
  const bool need_cols = !g.depthwise() && !g.pointwise();
  if (need_cols) {
    cols.resize(static_cast<size_t>(g.patch() * ohw));
    dcols.resize(cols.size());
  }
  for (int64_t n = 0; n < g.n; ++n) {
    const T* xn = x + n * g.cin * g.h * g.w;
    const T* dyn = dy + n * g.cout * ohw;
    T* dxn = dx ? dx + n * g.cin * g.h * g.w : nullptr;
    if (db) {
      for (int64_t c = 0; c < g.cout; ++c) {
        T s = T(0);
        for (int64_t i = 0; i < ohw; ++i) s += dyn[c * ohw + i];
        db[c] += s;
      }
    }
    if (g.depthwise()) {
      depthwise_backward(g, xn, w, dyn, dxn, dw);
      continue;
    }
    for (int64_t grp = 0; grp < g.groups; ++grp) {
      const T* xg = xn + grp * g.cin_g() * g.h * g.w;
      const T* dyg = dyn + grp * g.cout_g() * ohw;
      const T* wg = w + grp * g.cout_g() * g.patch();
      if (dw) {
        const T* src = xg;
        if (need_cols) {
          im2col(xg, g, cols.data());
          src = cols.data();
        }
        kernels::gemm(false, true, g.cout_g(), g.patch(), ohw, dyg, ohw, src, ohw, T(1),
                      dw + grp * g.cout_g() * g.patch(), g.patch());
      }
      if (dxn) {
        T* dxg = dxn + grp * g.cin_g() * g.h * g.w;
        if (need_cols) {
          kernels::gemm(true, false, g.patch(), ohw, g.cout_g(), wg, g.patch(), dyg, ohw, T(0), dcols.data(),
                        ohw);
          col2im_add(dcols.data(), g, dxg);
        } else {
          kernels::gemm(true, false, g.patch(), ohw, g.cout_g(), wg, g.patch(), dyg, ohw, T(1), dxg, ohw);
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dOptions& opt) {
  if (x.rank() != 4) throw ConfigError("conv2d: input must be rank-4, got " + shape_str(x.shape()));
  if (w.rank() != 4) throw ConfigError("conv2d: weight must be rank-4, got " + shape_str(w.shape()));
  detail::require_same_dtype(x, w, "conv2d");
  ConvGeometry g{};
  g.n = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = w.dim(0);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.stride = opt.stride;
  g.pad = opt.padding;
  g.groups = opt.groups;
  if (g.groups <= 0 || g.cin % g.groups != 0 || g.cout % g.groups != 0) {
    throw ConfigError("conv2d: channels in=" + std::to_string(g.cin) + " out=" + std::to_string(g.cout) +
                      " not divisible by groups=" + std::to_string(g.groups));
  }
  if (w.dim(1) != g.cin_g()) {
    throw ConfigError("conv2d: weight " + shape_str(w.shape()) + " expects " +
                      std::to_string(w.dim(1) * g.groups) + " input channels, input is " + shape_str(x.shape()));
  }
  if (b.defined()) {
    detail::require_same_dtype(x, b, "conv2d");
    if (b.rank() != 1 || b.dim(0) != g.cout) {
      throw ConfigError("conv2d: bias " + shape_str(b.shape()) + " for " + std::to_string(g.cout) + " outputs");
    }
  }
  if (g.pad < 0) throw ConfigError("conv2d: negative padding");
  g.oh = conv_out_extent(g.h, g.kh, g.stride, g.pad);
  g.ow = conv_out_extent(g.w, g.kw, g.stride, g.pad);

  Tensor y = Tensor::zeros({g.n, g.cout, g.oh, g.ow}, x.dtype());
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    conv_forward<T>(g, x.data<T>().data(), w.data<T>().data(), b.defined() ? b.data<T>().data() : nullptr,
                    y.data<T>().data());
  });
  detail::check_finite(y, "conv2d");
  if (detail::wants_grad({&x, &w, &b})) {
    detail::record(y, "conv2d", {&x, &w, &b}, [g](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        detail::Node& xn = *self.inputs[0];
        detail::Node& wn = *self.inputs[1];
        T* dx = detail::input_needs_grad(self, 0) ? xn.grads<T>().data() : nullptr;
        T* dw = detail::input_needs_grad(self, 1) ? wn.grads<T>().data() : nullptr;
        T* db = detail::input_needs_grad(self, 2) ? self.inputs[2]->grads<T>().data() : nullptr;
        conv_backward<T>(g, xn.values<T>().data(), wn.values<T>().data(), self.grads<T>().data(), dx, dw, db);
      });
    });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1)) {
    throw ConfigError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                      shape_str(w.shape()));
  }
  detail::require_same_dtype(x, w, "linear");
  const int64_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (b.defined() && (b.rank() != 1 || b.dim(0) != out)) {
    throw ConfigError("linear: bias " + shape_str(b.shape()) + " for " + std::to_string(out) + " outputs");
  }
  Tensor y = Tensor::zeros({n, out}, x.dtype());
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    T* yv = y.data<T>().data();
    kernels::gemm(false, true, n, out, in, x.data<T>().data(), in, w.data<T>().data(), in, T(0), yv, out);
    if (b.defined()) {
      const T* bv = b.data<T>().data();
      for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < out; ++j) yv[i * out + j] += bv[j];
      }
    }
  });
  detail::check_finite(y, "linear");
  if (detail::wants_grad({&x, &w, &b})) {
    detail::record(y, "linear", {&x, &w, &b}, [n, in, out](detail::Node& self) {
      dispatch_dtype(self.dtype, [&]<typename T>() {
        const T* dy = self.grads<T>().data();
        detail::Node& xn = *self.inputs[0];
        detail::Node& wn = *self.inputs[1];
        if (detail::input_needs_grad(self, 0)) {
          kernels::gemm(false, false, n, in, out, dy, out, wn.values<T>().data(), in, T(1), xn.grads<T>().data(),
                        in);
        }
        if (detail::input_needs_grad(self, 1)) {
          kernels::gemm(true, false, out, in, n, dy, out, xn.values<T>().data(), in, T(1), wn.grads<T>().data(),
                        in);
        }
        if (detail::input_needs_grad(self, 2)) {
          T* db = self.inputs[2]->grads<T>().data();
          for (int64_t i = 0; i < n; ++i) {
            for (int64_t j = 0; j < out; ++j) db[j] += dy[i * out + j];
          }
        }
      });
    });
  }
  return y;
}

}  // namespace nex
