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

#include <bit>
#include <cmath>
#include <cstdint>
#include <type_traits>
#include <initializer_list>
#include <string>

#include "nexception/tensor.hpp"

namespace nex::detail {

inline bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

/// Links `out` to its inputs. Undefined inputs are skipped; the closure must
/// know the positional layout it was built with.
inline void record(Tensor& out, const char* op, std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> fn) {
  Node& n = out.node();
  n.op = op;
  n.requires_grad = true;
  for (const Tensor* t : inputs) n.inputs.push_back(t && t->defined() ? t->node_ptr() : nullptr);
  n.backward = std::move(fn);
}

// Exponent-field test as an integer OR-reduction so the loop vectorises.
template <typename T>
void check_finite(std::span<const T> values, const char* what) {
  using U = std::conditional_t<sizeof(T) == 4, uint32_t, uint64_t>;
  constexpr U exp_mask = sizeof(T) == 4 ? U(0x7f800000u) : U(0x7ff0000000000000ull);
  U bad = 0;
  for (T v : values) bad |= static_cast<U>((std::bit_cast<U>(v) & exp_mask) == exp_mask);
  if (bad) throw NumericError(std::string("non-finite value produced by ") + what);
}

inline void check_finite(const Tensor& t, const char* what) {
  dispatch_dtype(t.dtype(), [&]<typename T>() { check_finite<T>(t.data<T>(), what); });
}

inline void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    throw ConfigError(std::string(op) + ": dtype mismatch " + dtype_name(a.dtype()) + " vs " +
                      dtype_name(b.dtype()));
  }
}

/// True when input slot i exists and wants a gradient.
inline bool input_needs_grad(const Node& n, size_t i) {
  return i < n.inputs.size() && n.inputs[i] && n.inputs[i]->requires_grad;
}

}  // namespace nex::detail
