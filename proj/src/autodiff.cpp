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

#include "synthneg/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>

#include "synthneg/error.hpp"

namespace synthneg::ad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

thread_local bool g_checked = false;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MatMap as_matrix(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw InvalidArgument(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                        shape_string(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& what) {
  throw InvalidArgument(std::string(op) + ": " + what + " (shape " + shape_string(a) + ")");
}

void accumulate(Node& node, const Tensor& g) {
  if (!node.requires_grad) return;
  if (node.grad.empty()) node.grad = Tensor::zeros_like(node.value);
  auto dst = node.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Var make_op(const char* op, Tensor value, std::initializer_list<const Var*> inputs,
            std::function<void(Node&)> bw) {
  if (g_checked && !value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite output of shape " + value.shape_str());
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  bool any = false;
  for (const Var* in : inputs) any = any || in->requires_grad();
  if (any) {
    node->requires_grad = true;
    node->is_leaf = false;
    for (const Var* in : inputs) node->parents.push_back(in->node());
    node->backward = std::move(bw);
  }
  return Var(std::move(node));
}

Var make_op_n(const char* op, Tensor value, std::span<const Var> inputs,
              std::function<void(Node&)> bw) {
  if (g_checked && !value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite output of shape " + value.shape_str());
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  bool any = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->is_leaf = false;
    for (const Var& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(bw);
  }
  return Var(std::move(node));
}

void require_defined(const char* op, const Var& v) {
  if (!v.defined()) throw InvalidArgument(std::string(op) + ": undefined input");
}

enum class Broadcast { kSame, kRow, kScalar };

Broadcast broadcast_kind(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::kSame;
  const std::size_t nb = shape_size(b);
  if (nb == 1) return Broadcast::kScalar;
  const bool row_shaped = b.size() == 1 || (b.size() == 2 && b[0] == 1);
  if (row_shaped && !a.empty() && nb == a.back()) return Broadcast::kRow;
  shape_error(op, a, b);
}

inline std::size_t bindex(Broadcast k, std::size_t i, std::size_t cols) {
  switch (k) {
    case Broadcast::kSame:
      return i;
    case Broadcast::kRow:
      return i % cols;
    case Broadcast::kScalar:
      return 0;
  }
  return 0;
}

// Sum a full-shaped gradient down to the broadcast operand's shape.
Tensor reduce_to(const Tensor& g, const Shape& target, Broadcast kind) {
  if (kind == Broadcast::kSame) return g;
  Tensor out(target);
  const std::size_t cols = g.cols();
  auto src = g.data();
  for (std::size_t i = 0; i < src.size(); ++i) out[bindex(kind, i, cols)] += src[i];
  return out;
}

template <typename F>
Tensor elementwise(const Tensor& a, const Tensor& b, Broadcast kind, F f) {
  Tensor out(a.shape());
  const std::size_t cols = a.cols();
  auto pa = a.data();
  auto pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = f(pa[i], pb[bindex(kind, i, cols)]);
  return out;
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  auto px = x.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = f(px[i]);
  return out;
}

// Unary elementwise op whose derivative is expressed through input x and
// output y.
template <typename F, typename D>
Var unary(const char* op, const Var& x, F f, D dfdx) {
  require_defined(op, x);
  Tensor y = map(x.value(), f);
  return make_op(op, std::move(y), {&x}, [dfdx](Node& self) {
    Node& p = *self.parents[0];
    Tensor g(p.value.shape());
    auto px = p.value.data();
    auto py = self.value.data();
    auto pg = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = pg[i] * dfdx(px[i], py[i]);
    accumulate(p, g);
  });
}

std::size_t check_rows(const char* op, const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t n = x.rows();
  for (std::size_t r : rows) {
    if (r >= n) {
      shape_error(op, x.shape(), "row index " + std::to_string(r) + " out of range");
    }
  }
  return n;
}

}  // namespace

Tensor& Var::mutable_value() {
  if (!node_->is_leaf) {
    throw InvalidArgument(std::string("mutable_value: node produced by '") + node_->op +
                          "' is not a leaf");
  }
  return node_->value;
}

const Tensor& Var::grad() const {
  if (node_->grad.empty()) node_->grad = Tensor::zeros_like(node_->value);
  return node_->grad;
}

void Var::zero_grad() { node_->grad = Tensor::zeros_like(node_->value); }

double Var::item() const {
  if (node_->value.size() != 1) {
    throw InvalidArgument("item: expected a scalar, got shape " + node_->value.shape_str());
  }
  return node_->value[0];
}

Var parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->grad = Tensor::zeros_like(value);
  node->value = std::move(value);
  node->requires_grad = true;
  node->op = "parameter";
  return Var(std::move(node));
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "constant";
  return Var(std::move(node));
}

Var stop_gradient(const Var& x) {
  require_defined("stop_gradient", x);
  auto node = std::make_shared<Node>();
  node->value = x.value();
  node->op = "stop_gradient";
  return Var(std::move(node));
}

Var add(const Var& a, const Var& b) {
  require_defined("add", a);
  require_defined("add", b);
  const Broadcast kind = broadcast_kind("add", a.shape(), b.shape());
  Tensor y = elementwise(a.value(), b.value(), kind, [](double u, double v) { return u + v; });
  return make_op("add", std::move(y), {&a, &b}, [kind](Node& self) {
    accumulate(*self.parents[0], self.grad);
    Node& pb = *self.parents[1];
    if (pb.requires_grad) accumulate(pb, reduce_to(self.grad, pb.value.shape(), kind));
  });
}

Var sub(const Var& a, const Var& b) {
  require_defined("sub", a);
  require_defined("sub", b);
  const Broadcast kind = broadcast_kind("sub", a.shape(), b.shape());
  Tensor y = elementwise(a.value(), b.value(), kind, [](double u, double v) { return u - v; });
  return make_op("sub", std::move(y), {&a, &b}, [kind](Node& self) {
    accumulate(*self.parents[0], self.grad);
    Node& pb = *self.parents[1];
    if (pb.requires_grad) {
      Tensor g = map(self.grad, [](double v) { return -v; });
      accumulate(pb, reduce_to(g, pb.value.shape(), kind));
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_defined("mul", a);
  require_defined("mul", b);
  const Broadcast kind = broadcast_kind("mul", a.shape(), b.shape());
  Tensor y = elementwise(a.value(), b.value(), kind, [](double u, double v) { return u * v; });
  return make_op("mul", std::move(y), {&a, &b}, [kind](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      accumulate(pa, elementwise(self.grad, pb.value, kind,
                                 [](double g, double v) { return g * v; }));
    }
    if (pb.requires_grad) {
      Tensor g = Tensor::zeros_like(self.grad);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * pa.value[i];
      accumulate(pb, reduce_to(g, pb.value.shape(), kind));
    }
  });
}

Var maximum(const Var& a, const Var& b) {
  require_defined("maximum", a);
  require_defined("maximum", b);
  const Broadcast kind = broadcast_kind("maximum", a.shape(), b.shape());
  Tensor y = elementwise(a.value(), b.value(), kind,
                         [](double u, double v) { return u >= v ? u : v; });
  return make_op("maximum", std::move(y), {&a, &b}, [kind](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t cols = pa.value.cols();
    Tensor ga = Tensor::zeros_like(self.grad);
    Tensor gb_full = Tensor::zeros_like(self.grad);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (pa.value[i] >= pb.value[bindex(kind, i, cols)]) {
        ga[i] = self.grad[i];
      } else {
        gb_full[i] = self.grad[i];
      }
    }
    accumulate(pa, ga);
    if (pb.requires_grad) accumulate(pb, reduce_to(gb_full, pb.value.shape(), kind));
  });
}

Var scale(const Var& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Var add_scalar(const Var& x, double offset) {
  return unary(
      "add_scalar", x, [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Var neg(const Var& x) { return scale(x, -1.0); }

Var matmul(const Var& a, const Var& b) {
  require_defined("matmul", a);
  require_defined("matmul", b);
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.shape()[1] != b.shape()[0]) {
    shape_error("matmul", a.shape(), b.shape());
  }
  Tensor y({a.shape()[0], b.shape()[1]});
  as_matrix(y).noalias() = as_matrix(a.value()) * as_matrix(b.value());
  return make_op("matmul", std::move(y), {&a, &b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor g(pa.value.shape());
      as_matrix(g).noalias() = as_matrix(self.grad) * as_matrix(pb.value).transpose();
      accumulate(pa, g);
    }
    if (pb.requires_grad) {
      Tensor g(pb.value.shape());
      as_matrix(g).noalias() = as_matrix(pa.value).transpose() * as_matrix(self.grad);
      accumulate(pb, g);
    }
  });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  require_defined("affine", x);
  require_defined("affine", w);
  require_defined("affine", b);
  if (x.value().rank() != 2 || w.value().rank() != 2 || x.shape()[1] != w.shape()[0]) {
    shape_error("affine", x.shape(), w.shape());
  }
  const std::size_t m = w.shape()[1];
  if (b.size() != m) shape_error("affine", w.shape(), b.shape());
  Tensor y({x.shape()[0], m});
  auto ym = as_matrix(y);
  ym.noalias() = as_matrix(x.value()) * as_matrix(w.value());
  Eigen::Map<const Eigen::RowVectorXd> bias(b.value().data().data(), static_cast<Eigen::Index>(m));
  ym.rowwise() += bias;
  return make_op("affine", std::move(y), {&x, &w, &b}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    const auto g = as_matrix(self.grad);
    if (px.requires_grad) {
      Tensor gx(px.value.shape());
      as_matrix(gx).noalias() = g * as_matrix(pw.value).transpose();
      accumulate(px, gx);
    }
    if (pw.requires_grad) {
      Tensor gw(pw.value.shape());
      as_matrix(gw).noalias() = as_matrix(px.value).transpose() * g;
      accumulate(pw, gw);
    }
    if (pb.requires_grad) {
      Tensor gb(pb.value.shape());
      Eigen::Map<Eigen::RowVectorXd>(gb.data().data(), static_cast<Eigen::Index>(gb.size())) =
          g.colwise().sum();
      accumulate(pb, gb);
    }
  });
}

Var relu(const Var& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& x) {
  require_defined("tanh", x);
  Tensor y = x.value();
  tanh_inplace(y.data());
  return make_op("tanh", std::move(y), {&x}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor g(p.value.shape());
    auto py = self.value.data();
    auto pg = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = pg[i] * (1.0 - py[i] * py[i]);
    accumulate(p, g);
  });
}

Var sigmoid(const Var& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(const Var& x) {
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var softmax(const Var& x) {
  require_defined("softmax", x);
  Tensor y = softmax_rows(x.value());
  return make_op("softmax", std::move(y), {&x}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor g(p.value.shape());
    const std::size_t n = g.rows();
    const std::size_t k = g.cols();
    for (std::size_t r = 0; r < n; ++r) {
      auto y = self.value.row(r);
      auto gy = self.grad.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += gy[c] * y[c];
      auto gx = g.row(r);
      for (std::size_t c = 0; c < k; ++c) gx[c] = y[c] * (gy[c] - dot);
    }
    accumulate(p, g);
  });
}

Var log_softmax(const Var& x) {
  require_defined("log_softmax", x);
  Tensor y = log_softmax_rows(x.value());
  return make_op("log_softmax", std::move(y), {&x}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor g(p.value.shape());
    const std::size_t n = g.rows();
    const std::size_t k = g.cols();
    for (std::size_t r = 0; r < n; ++r) {
      auto y = self.value.row(r);
      auto gy = self.grad.row(r);
      double total = 0.0;
      for (std::size_t c = 0; c < k; ++c) total += gy[c];
      auto gx = g.row(r);
      for (std::size_t c = 0; c < k; ++c) gx[c] = gy[c] - std::exp(y[c]) * total;
    }
    accumulate(p, g);
  });
}

Var logsumexp(const Var& x) {
  require_defined("logsumexp", x);
  Tensor y = logsumexp_rows(x.value());
  return make_op("logsumexp", std::move(y), {&x}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor g(p.value.shape());
    const std::size_t n = g.rows();
    const std::size_t k = g.cols();
    for (std::size_t r = 0; r < n; ++r) {
      auto in = p.value.row(r);
      auto gx = g.row(r);
      const double lse = self.value[r];
      const double gr = self.grad[r];
      for (std::size_t c = 0; c < k; ++c) gx[c] = gr * std::exp(in[c] - lse);
    }
    accumulate(p, g);
  });
}

Var sum_last(const Var& x) {
  require_defined("sum_last", x);
  Shape shape = x.shape();
  shape.back() = 1;
  Tensor y(std::move(shape));
  const std::size_t n = x.value().rows();
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (double v : x.value().row(r)) s += v;
    y[r] = s;
  }
  return make_op("sum_last", std::move(y), {&x}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor g(p.value.shape());
    const std::size_t n = g.rows();
    for (std::size_t r = 0; r < n; ++r) {
      for (double& v : g.row(r)) v = self.grad[r];
    }
    accumulate(p, g);
  });
}

Var sum(const Var& x) {
  require_defined("sum", x);
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_op("sum", Tensor::scalar(s), {&x}, [](Node& self) {
    Node& p = *self.parents[0];
    accumulate(p, Tensor(p.value.shape(), self.grad[0]));
  });
}

Var mean(const Var& x) {
  require_defined("mean", x);
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_op("mean", Tensor::scalar(s / n), {&x}, [n](Node& self) {
    Node& p = *self.parents[0];
    accumulate(p, Tensor(p.value.shape(), self.grad[0] / n));
  });
}

Var reshape(const Var& x, Shape shape) {
  require_defined("reshape", x);
  Tensor y = x.value().reshaped(std::move(shape));
  return make_op("reshape", std::move(y), {&x}, [](Node& self) {
    Node& p = *self.parents[0];
    accumulate(p, self.grad.reshaped(p.value.shape()));
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  require_defined("gather_rows", x);
  if (rows.empty()) shape_error("gather_rows", x.shape(), "empty row selection");
  check_rows("gather_rows", x.value(), rows);
  const std::size_t k = x.value().cols();
  Tensor y({rows.size(), k});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.value().row(rows[i]).begin(), k, y.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_op("gather_rows", std::move(y), {&x}, [idx = std::move(idx)](Node& self) {
    Node& p = *self.parents[0];
    Tensor g(p.value.shape());
    const std::size_t k = g.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = self.grad.row(i);
      auto dst = g.row(idx[i]);
      for (std::size_t c = 0; c < k; ++c) dst[c] += src[c];
    }
    accumulate(p, g);
  });
}

Var scatter_rows(const Var& base, std::span<const std::size_t> rows, const Var& src) {
  require_defined("scatter_rows", base);
  require_defined("scatter_rows", src);
  const std::size_t k = base.value().cols();
  if (src.value().cols() != k || src.value().rows() != rows.size()) {
    shape_error("scatter_rows", base.shape(), src.shape());
  }
  check_rows("scatter_rows", base.value(), rows);
  {
    std::vector<std::size_t> sorted(rows.begin(), rows.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      shape_error("scatter_rows", base.shape(), "duplicate target rows");
    }
  }
  Tensor y = base.value();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.value().row(i).begin(), k, y.row(rows[i]).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_op("scatter_rows", std::move(y), {&base, &src}, [idx = std::move(idx)](Node& self) {
    Node& pb = *self.parents[0];
    Node& ps = *self.parents[1];
    const std::size_t k = self.grad.cols();
    if (pb.requires_grad) {
      Tensor g = self.grad;
      for (std::size_t r : idx) {
        for (double& v : g.row(r)) v = 0.0;
      }
      accumulate(pb, g);
    }
    if (ps.requires_grad) {
      Tensor g(ps.value.shape());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(self.grad.row(idx[i]).begin(), k, g.row(i).begin());
      }
      accumulate(ps, g);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
  for (const Var& p : parts) require_defined("concat_rows", p);
  const std::size_t k = parts[0].value().cols();
  std::size_t n = 0;
  for (const Var& p : parts) {
    if (p.value().cols() != k) shape_error("concat_rows", parts[0].shape(), p.shape());
    n += p.value().rows();
  }
  Tensor y({n, k});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), y.data().begin() + offset * k);
    offset += p.value().rows();
  }
  return make_op_n("concat_rows", std::move(y), parts, [](Node& self) {
    const std::size_t k = self.grad.cols();
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const std::size_t rows = parent->value.rows();
      if (parent->requires_grad) {
        Tensor g(parent->value.shape());
        std::copy_n(self.grad.data().begin() + offset * k, rows * k, g.data().begin());
        accumulate(*parent, g);
      }
      offset += rows;
    }
  });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  require_defined("slice_cols", x);
  const std::size_t k = x.value().cols();
  if (begin >= end || end > k) {
    shape_error("slice_cols", x.shape(),
                "bad column range [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
  }
  const std::size_t n = x.value().rows();
  const std::size_t w = end - begin;
  Tensor y({n, w});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(x.value().row(r).begin() + begin, w, y.row(r).begin());
  }
  return make_op("slice_cols", std::move(y), {&x}, [begin, w](Node& self) {
    Node& p = *self.parents[0];
    Tensor g(p.value.shape());
    const std::size_t n = g.rows();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(self.grad.row(r).begin(), w, g.row(r).begin() + begin);
    }
    accumulate(p, g);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  for (const Var& p : parts) require_defined("concat_cols", p);
  const std::size_t n = parts[0].value().rows();
  std::size_t k = 0;
  for (const Var& p : parts) {
    if (p.value().rows() != n) shape_error("concat_cols", parts[0].shape(), p.shape());
    k += p.value().cols();
  }
  Tensor y({n, k});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.value().cols();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(p.value().row(r).begin(), w, y.row(r).begin() + offset);
    }
    offset += w;
  }
  return make_op_n("concat_cols", std::move(y), parts, [](Node& self) {
    const std::size_t n = self.grad.rows();
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const std::size_t w = parent->value.cols();
      if (parent->requires_grad) {
        Tensor g(parent->value.shape());
        for (std::size_t r = 0; r < n; ++r) {
          std::copy_n(self.grad.row(r).begin() + offset, w, g.row(r).begin());
        }
        accumulate(*parent, g);
      }
      offset += w;
    }
  });
}

Var pick(const Var& x, std::span<const std::size_t> index) {
  require_defined("pick", x);
  const std::size_t n = x.value().rows();
  const std::size_t k = x.value().cols();
  if (index.size() != n) {
    shape_error("pick", x.shape(), "needs " + std::to_string(n) + " indices, got " +
                                       std::to_string(index.size()));
  }
  Tensor y({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    if (index[r] >= k) shape_error("pick", x.shape(), "column index out of range");
    y[r] = x.value().at(r, index[r]);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_op("pick", std::move(y), {&x}, [idx = std::move(idx)](Node& self) {
    Node& p = *self.parents[0];
    Tensor g(p.value.shape());
    for (std::size_t r = 0; r < idx.size(); ++r) g.at(r, idx[r]) = self.grad[r];
    accumulate(p, g);
  });
}

void backward(const Var& loss) {
  require_defined("backward", loss);
  if (loss.size() != 1) {
    throw InvalidArgument("backward: loss must be a scalar, got shape " +
                          shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS over gradient-carrying nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* child = node->parents[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf) n->grad = Tensor::zeros_like(n->value);
  }
  Node& root = *loss.node();
  if (root.grad.empty()) root.grad = Tensor::zeros_like(root.value);
  root.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf && (*it)->backward) (*it)->backward(**it);
  }
}

CheckedMode::CheckedMode() : previous_(g_checked) { g_checked = true; }
CheckedMode::~CheckedMode() { g_checked = previous_; }

bool checked_mode_enabled() { return g_checked; }

}  // namespace synthneg::ad
