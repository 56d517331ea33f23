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

#include "nexception/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

namespace nex {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

const char* dtype_name(DType dtype) { return dtype == DType::kFloat64 ? "float64" : "float32"; }

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ConfigError("negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

namespace detail {

bool Node::has_grad() const {
  return std::visit([](const auto& g) { return !g.empty(); }, grad);
}

}  // namespace detail

namespace {

detail::NodePtr make_node(const Shape& shape, DType dtype) {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->dtype = dtype;
  const auto n = static_cast<size_t>(shape_numel(shape));
  if (dtype == DType::kFloat64) {
    node->data = std::vector<double>(n, 0.0);
    node->grad = std::vector<double>();
  } else {
    node->data = std::vector<float>(n, 0.0f);
    node->grad = std::vector<float>();
  }
  return node;
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, DType dtype) { return Tensor(make_node(shape, dtype)); }

Tensor Tensor::full(const Shape& shape, double value, DType dtype) {
  Tensor t = zeros(shape, dtype);
  dispatch_dtype(dtype, [&]<typename T>() {
    auto& v = t.node().values<T>();
    std::fill(v.begin(), v.end(), static_cast<T>(value));
  });
  return t;
}

Tensor Tensor::from_values(const Shape& shape, std::span<const double> values, DType dtype) {
  if (static_cast<int64_t>(values.size()) != shape_numel(shape)) {
    throw ConfigError("from_values: " + std::to_string(values.size()) +
                      " values do not fill shape " + shape_str(shape));
  }
  Tensor t = zeros(shape, dtype);
  dispatch_dtype(dtype, [&]<typename T>() {
    auto& v = t.node().values<T>();
    std::transform(values.begin(), values.end(), v.begin(),
                   [](double x) { return static_cast<T>(x); });
  });
  return t;
}

Tensor Tensor::from_values(const Shape& shape, std::initializer_list<double> values, DType dtype) {
  return from_values(shape, std::span<const double>(values.begin(), values.size()), dtype);
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev, DType dtype) {
  Tensor t = zeros(shape, dtype);
  std::normal_distribution<double> dist(0.0, stddev);
  dispatch_dtype(dtype, [&]<typename T>() {
    for (auto& x : t.node().values<T>()) x = static_cast<T>(dist(rng));
  });
  return t;
}

Tensor Tensor::uniform(const Shape& shape, Rng& rng, double lo, double hi, DType dtype) {
  Tensor t = zeros(shape, dtype);
  std::uniform_real_distribution<double> dist(lo, hi);
  dispatch_dtype(dtype, [&]<typename T>() {
    for (auto& x : t.node().values<T>()) x = static_cast<T>(dist(rng));
  });
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }

int64_t Tensor::dim(int axis) const {
  const auto& s = node_->shape;
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ConfigError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[static_cast<size_t>(axis)];
}

int64_t Tensor::numel() const { return shape_numel(node_->shape); }

DType Tensor::dtype() const { return node_->dtype; }

double Tensor::at(int64_t flat) const {
  return std::visit([&](const auto& v) { return static_cast<double>(v.at(static_cast<size_t>(flat))); },
                    node_->data);
}

void Tensor::set(int64_t flat, double value) {
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        v.at(static_cast<size_t>(flat)) = static_cast<T>(value);
      },
      node_->data);
}

double Tensor::item() const {
  if (numel() != 1) throw ConfigError("item() on tensor of shape " + shape_str(shape()));
  return at(0);
}

std::vector<double> Tensor::to_vector() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); },
                    node_->data);
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return node_->has_grad(); }

Tensor Tensor::grad() const {
  Tensor g = zeros(shape(), dtype());
  if (!has_grad()) return g;
  dispatch_dtype(dtype(), [&]<typename T>() { g.node().values<T>() = node_->grads<T>(); });
  return g;
}

std::vector<double> Tensor::grad_vector() const { return grad().to_vector(); }

void Tensor::zero_grad() {
  std::visit([](auto& g) { g.clear(); }, node_->grad);
}

Tensor Tensor::detach() const {
  Tensor t(make_node(shape(), dtype()));
  t.node().data = node_->data;
  return t;
}

Tensor Tensor::to(DType target) const {
  Tensor t = zeros(shape(), target);
  dispatch_dtype(target, [&]<typename T>() {
    auto& dst = t.node().values<T>();
    std::visit(
        [&](const auto& src) {
          std::transform(src.begin(), src.end(), dst.begin(), [](auto x) { return static_cast<T>(x); });
        },
        node_->data);
  });
  t.set_requires_grad(requires_grad());
  return t;
}

void Tensor::assign(const Tensor& src) {
  if (src.shape() != shape()) {
    throw ConfigError("assign: shape " + shape_str(src.shape()) + " into " + shape_str(shape()));
  }
  dispatch_dtype(dtype(), [&]<typename T>() {
    auto& dst = node_->values<T>();
    std::visit(
        [&](const auto& s) {
          std::transform(s.begin(), s.end(), dst.begin(), [](auto x) { return static_cast<T>(x); });
        },
        src.node().data);
  });
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward on undefined tensor");
  if (loss.numel() != 1) {
    throw GraphError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) throw GraphError("loss does not depend on any tensor requiring grad");

  // Iterative DFS; colour 1 = on stack, 2 = finished.
  std::vector<detail::Node*> order;
  std::unordered_map<detail::Node*, int> colour;
  std::vector<std::pair<detail::Node*, size_t>> stack;
  stack.emplace_back(&loss.node(), 0);
  colour[&loss.node()] = 1;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child == nullptr || !child->requires_grad) continue;
      int& c = colour[child];
      if (c == 1) throw GraphError("cycle detected in autodiff graph at op " + std::string(child->op));
      if (c == 0) {
        c = 1;
        stack.emplace_back(child, 0);
      }
      continue;
    }
    colour[node] = 2;
    order.push_back(node);
    stack.pop_back();
  }

  // Interior gradients live only for the duration of this call.
  for (detail::Node* n : order) {
    if (!n->is_leaf()) std::visit([](auto& g) { g.clear(); }, n->grad);
  }
  dispatch_dtype(loss.dtype(), [&]<typename T>() { loss.node().grads<T>()[0] += T(1); });
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf() || !n->has_grad()) continue;
    n->backward(*n);
  }
  for (detail::Node* n : order) {
    if (!n->is_leaf()) std::visit([](auto& g) { g.clear(); }, n->grad);
  }
}

}  // namespace nex
