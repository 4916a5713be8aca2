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

#include "synthneg/binary_io.hpp"

namespace synthneg::io {

namespace {
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
}  // namespace

void write_tensor_table(std::ostream& os, const std::vector<Tensor>& tensors) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor& t : tensors) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) write_le<std::uint64_t>(os, e);
  }
  for (const Tensor& t : tensors) {
    for (double v : t.data()) write_le<double>(os, v);
  }
}

std::vector<Tensor> read_tensor_table(std::istream& is) {
  const auto count = read_le<std::uint32_t>(is);
  std::vector<Shape> shapes(count);
  for (auto& shape : shapes) {
    const auto rank = read_le<std::uint32_t>(is);
    if (rank == 0 || rank > kMaxRank) throw FormatError("tensor table: bad rank");
    std::uint64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto e = read_le<std::uint64_t>(is);
      if (e == 0 || e > kMaxElements) throw FormatError("tensor table: bad extent");
      n *= e;
      if (n > kMaxElements) throw FormatError("tensor table: tensor too large");
      shape.push_back(static_cast<std::size_t>(e));
    }
  }
  std::vector<Tensor> out;
  out.reserve(count);
  for (auto& shape : shapes) {
    Tensor t(shape);
    for (double& v : t.data()) v = read_le<double>(is);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace synthneg::io
