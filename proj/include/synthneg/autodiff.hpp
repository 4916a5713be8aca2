// Copyright 2026 The synthneg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Define-by-run reverse-mode automatic differentiation.
//
// A Var is a handle to a graph node. Leaves are created with parameter()
// (trainable, gradient accumulates) or constant(). Every op records a
// vector-Jacobian product; backward() walks the graph once in reverse
// topological order. Nodes whose inputs carry no gradient are folded into
// constants at construction, so stop_gradient() simply returns a detached
// constant holding the same value.

#ifndef SYNTHNEG_AUTODIFF_HPP_
#define SYNTHNEG_AUTODIFF_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "synthneg/tensor.hpp"

namespace synthneg::ad {

struct Node {
  Tensor value;
  Tensor grad;  // allocated for leaves at creation, for interior nodes by backward()
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }
  const char* op() const { return node_->op; }

  // Leaf values may be overwritten in place (optimizer updates, finite
  // difference probes). Throws on interior nodes.
  Tensor& mutable_value();

  // Zero tensor until backward() has touched this node.
  const Tensor& grad() const;
  void zero_grad();

  double item() const;  // value of a scalar node

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var parameter(Tensor value);
Var constant(Tensor value);

// Same value, no gradient path to anything upstream.
Var stop_gradient(const Var& x);

// Elementwise binary ops accept equal shapes, a right operand of shape
// {1, cols} / {cols} broadcast across rows, or a scalar {1}.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double offset);
Var neg(const Var& x);

// (n x k) * (k x m)
Var matmul(const Var& a, const Var& b);
// x * w + b, with b of shape {m} or {1, m} broadcast across rows.
Var affine(const Var& x, const Var& w, const Var& b);

Var relu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);

// Along the last axis.
Var softmax(const Var& x);
Var log_softmax(const Var& x);
Var logsumexp(const Var& x);   // last extent -> 1
Var sum_last(const Var& x);    // last extent -> 1

Var sum(const Var& x);   // -> {1}
Var mean(const Var& x);  // -> {1}

Var reshape(const Var& x, Shape shape);

// Row selection / assembly on the rows() x cols() view.
Var gather_rows(const Var& x, std::span<const std::size_t> rows);
Var scatter_rows(const Var& base, std::span<const std::size_t> rows, const Var& src);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
Var concat_cols(std::span<const Var> parts);
// out[r] = x[r, index[r]]; shape rows() x 1.
Var pick(const Var& x, std::span<const std::size_t> index);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& x) { return scale(x, s); }
inline Var operator-(const Var& x) { return neg(x); }

// Accumulates d(loss)/d(leaf) into every reachable parameter. Interior
// gradients are reset on each call, leaf gradients are not.
void backward(const Var& loss);

// While alive, every op checks its output for NaN/Inf and throws
// NumericError naming the op. Thread-local.
class CheckedMode {
 public:
  CheckedMode();
  ~CheckedMode();
  CheckedMode(const CheckedMode&) = delete;
  CheckedMode& operator=(const CheckedMode&) = delete;

 private:
  bool previous_;
};

bool checked_mode_enabled();

}  // namespace synthneg::ad

#endif  // SYNTHNEG_AUTODIFF_HPP_
