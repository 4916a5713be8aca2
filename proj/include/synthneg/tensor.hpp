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

#ifndef SYNTHNEG_TENSOR_HPP_
#define SYNTHNEG_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace synthneg {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major array of doubles. Scalars have shape {1}.
//
// Operations that work "along the last axis" view a tensor as a matrix of
// rows() x cols(), where cols() is the last extent and rows() the product of
// the others.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const;
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t row, std::size_t col) { return data_[row * cols() + col]; }
  double at(std::size_t row, std::size_t col) const { return data_[row * cols() + col]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  // Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;
  std::string shape_str() const { return shape_string(shape_); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Row-wise numerics along the last axis, shared by the graph ops and by the
// graph-free scoring code so both see identical arithmetic.
Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);
// Output shape: input shape with the last extent replaced by 1.
Tensor logsumexp_rows(const Tensor& x);

// Elementwise tanh through a vectorised exp: 1 - 2 / (exp(2x) + 1).
void tanh_inplace(std::span<double> values);

}  // namespace synthneg

#endif  // SYNTHNEG_TENSOR_HPP_
