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

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace nex {

using Shape = std::vector<int64_t>;

enum class DType { kFloat32, kFloat64 };

const char* dtype_name(DType dtype);
std::string shape_str(const Shape& shape);
int64_t shape_numel(const Shape& shape);

/// Invalid shapes, channel counts or option values. Carries the offending dims
/// in the message.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf appeared in an op output, a loss or a gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Misuse of the autodiff graph (non-scalar loss, cycles).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Seeded generator used everywhere randomness is needed. No global state.
using Rng = std::mt19937_64;

namespace detail {

using Buffer = std::variant<std::vector<float>, std::vector<double>>;

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Shape shape;
  DType dtype = DType::kFloat32;
  Buffer data;
  Buffer grad;  // empty vector when no gradient has been accumulated
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  bool has_grad() const;

  template <typename T>
  std::vector<T>& values() {
    return std::get<std::vector<T>>(data);
  }
  template <typename T>
  const std::vector<T>& values() const {
    return std::get<std::vector<T>>(data);
  }
  // Allocates a zero gradient on first use.
  template <typename T>
  std::vector<T>& grads() {
    auto& g = std::get<std::vector<T>>(grad);
    if (g.empty()) g.assign(static_cast<size_t>(shape_numel(shape)), T(0));
    return g;
  }
};

}  // namespace detail

/// Dense row-major tensor handle. Copies share storage; ops never mutate their
/// inputs. Activations are NCHW.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, DType dtype = DType::kFloat32);
  static Tensor full(const Shape& shape, double value, DType dtype = DType::kFloat32);
  static Tensor from_values(const Shape& shape, std::span<const double> values,
                            DType dtype = DType::kFloat32);
  static Tensor from_values(const Shape& shape, std::initializer_list<double> values,
                            DType dtype = DType::kFloat32);
  static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0,
                      DType dtype = DType::kFloat32);
  static Tensor uniform(const Shape& shape, Rng& rng, double lo, double hi,
                        DType dtype = DType::kFloat32);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(shape().size()); }
  int64_t numel() const;
  DType dtype() const;

  template <typename T>
  std::span<T> data() {
    return node_->values<T>();
  }
  template <typename T>
  std::span<const T> data() const {
    return node_->values<T>();
  }

  /// Value at a flat index, widened to double.
  double at(int64_t flat) const;
  void set(int64_t flat, double value);
  double item() const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const;
  /// Copy of the accumulated gradient (zeros when none).
  Tensor grad() const;
  std::vector<double> grad_vector() const;
  template <typename T>
  std::span<T> grad_data() {
    return node_->grads<T>();
  }
  void zero_grad();

  /// New leaf with copied values and no history.
  Tensor detach() const;
  Tensor to(DType dtype) const;
  /// In-place overwrite of the values, keeping identity. Used by optimizers and
  /// checkpoint loading.
  void assign(const Tensor& src);

  detail::Node& node() const { return *node_; }
  const detail::NodePtr& node_ptr() const { return node_; }
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

 private:
  detail::NodePtr node_;
};

/// A named, optionally trainable model tensor.
struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
  bool weight_decay_exempt = false;
};

/// Populates gradients of every leaf reachable from `loss`. Accumulates into
/// existing leaf gradients.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Calls `fn.template operator()<T>()` with T = float or double.
template <typename Fn>
decltype(auto) dispatch_dtype(DType dtype, Fn&& fn) {
  if (dtype == DType::kFloat64) return fn.template operator()<double>();
  return fn.template operator()<float>();
}

template <typename T>
constexpr DType dtype_of() {
  return std::is_same_v<T, double> ? DType::kFloat64 : DType::kFloat32;
}

}  // namespace nex
