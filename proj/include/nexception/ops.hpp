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

// Differentiable tensor ops. Each op validates shapes, computes its output,
// rejects non-finite results with NumericError and, when any input requires
// grad, records a backward closure.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "nexception/tensor.hpp"

namespace nex {

struct Conv2dOptions {
  int64_t stride = 1;
  int64_t padding = 0;
  int64_t groups = 1;
};

/// Output extent of a strided window: floor((in + 2p - k) / s) + 1.
int64_t conv_out_extent(int64_t in, int64_t kernel, int64_t stride, int64_t padding);

/// x [N, Cin, H, W], w [Cout, Cin/groups, kH, kW], b [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dOptions& opt = {});

/// x [N, in], w [out, in], b [out] or undefined. y = x w^T + b.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

enum class ActKind { kReLU, kGELU, kELU, kCELU };
const char* act_name(ActKind kind);
ActKind parse_act(const std::string& name);

/// Elementwise. GELU is the exact x * Phi(x); ELU and CELU use alpha = 1.
Tensor activation(const Tensor& x, ActKind kind);
Tensor sigmoid(const Tensor& x);

struct BatchNormState {
  Tensor weight;        // [C]
  Tensor bias;          // [C]
  Tensor running_mean;  // [C], updated in training mode
  Tensor running_var;   // [C]
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Training mode normalises with (biased) batch statistics and updates the
/// running estimates with the unbiased variance; eval mode uses the running
/// estimates.
Tensor batch_norm(const Tensor& x, BatchNormState& state, bool training);

/// Normalises each (n, h, w) position across channels, then applies the
/// per-channel affine transform.
Tensor layer_norm(const Tensor& x, const Tensor& weight, const Tensor& bias, double eps = 1e-6);

/// [N, C, H, W] -> [N, C].
Tensor global_avg_pool(const Tensor& x);

/// Max pooling with implicit -inf padding. Gradient goes to the first maximum
/// in row-major window order.
Tensor max_pool2d(const Tensor& x, int64_t kernel, int64_t stride, int64_t padding);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor square(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, const Shape& shape);

/// x [N, C, H, W] times gate [N, C], broadcast over space.
Tensor channel_scale(const Tensor& x, const Tensor& gate);

/// Multiplies sample n of x by the constant factors[n].
Tensor sample_scale(const Tensor& x, std::span<const double> factors);

/// Mean over batch and classes of the binary cross-entropy between sigmoid(z)
/// and soft targets in [0, 1].
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

/// Mean over the batch of -sum_k t_k log softmax(z)_k.
Tensor soft_cross_entropy(const Tensor& logits, const Tensor& targets);

}  // namespace nex
