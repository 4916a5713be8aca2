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

#include "synthneg/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "synthneg/error.hpp"

namespace synthneg {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw InvalidArgument("tensor: empty shape");
  for (std::size_t e : shape) {
    if (e == 0) throw InvalidArgument("tensor: zero extent in shape " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw InvalidArgument("tensor: shape " + shape_string(shape_) + " needs " +
                          std::to_string(shape_size(shape_)) + " values, got " +
                          std::to_string(data_.size()));
  }
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) n *= shape_[i];
  return n;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw InvalidArgument("reshape: cannot view " + shape_str() + " as " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor softmax_rows(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  for (std::size_t r = 0; r < n; ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      o[c] = std::exp(in[c] - m);
      s += o[c];
    }
    for (std::size_t c = 0; c < k; ++c) o[c] /= s;
  }
  return out;
}

Tensor log_softmax_rows(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  for (std::size_t r = 0; r < n; ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(in[c] - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < k; ++c) o[c] = in[c] - lse;
  }
  return out;
}

Tensor logsumexp_rows(const Tensor& x) {
  Shape shape = x.shape();
  shape.back() = 1;
  Tensor out(std::move(shape));
  const std::size_t n = x.rows();
  for (std::size_t r = 0; r < n; ++r) {
    auto in = x.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (double v : in) s += std::exp(v - m);
    out[r] = m + std::log(s);
  }
  return out;
}

void tanh_inplace(std::span<double> values) {
  Eigen::Map<Eigen::ArrayXd> a(values.data(), static_cast<Eigen::Index>(values.size()));
  a = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
}

}  // namespace synthneg
