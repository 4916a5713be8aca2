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

#include "synthneg/flow.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "synthneg/binary_io.hpp"
#include "synthneg/error.hpp"

namespace synthneg::flow {

namespace {

constexpr char kMagic[5] = "SNFL";
constexpr std::uint32_t kVersion = 1;

Tensor make_mask(int dim, int parity) {
  Tensor m({1, static_cast<std::size_t>(dim)});
  for (int d = 0; d < dim; ++d) m[d] = (d % 2 == parity) ? 1.0 : 0.0;
  return m;
}

// Builds params from tensors in all() order; `trainable` picks parameter vs
// constant leaves.
FlowParams from_tensors(const FlowConfig& config, std::vector<Tensor> tensors, bool trainable) {
  const std::size_t per_layer = 2 * static_cast<std::size_t>(config.conditioner_depth) + 4;
  if (tensors.size() != per_layer * config.layers) {
    throw FormatError("flow: expected " + std::to_string(per_layer * config.layers) +
                      " tensors, got " + std::to_string(tensors.size()));
  }
  const std::size_t d = config.dim;
  const std::size_t h = config.hidden;
  std::size_t i = 0;
  auto take = [&](const Shape& shape) {
    Tensor& t = tensors[i++];
    if (t.shape() != shape) {
      throw FormatError("flow: tensor " + std::to_string(i - 1) + " has shape " + t.shape_str() +
                        ", expected " + shape_string(shape));
    }
    return trainable ? ad::parameter(std::move(t)) : ad::constant(std::move(t));
  };
  FlowParams f;
  f.config = config;
  for (int l = 0; l < config.layers; ++l) {
    CouplingLayer layer;
    layer.mask = make_mask(config.dim, l % 2);
    layer.inverse_mask = make_mask(config.dim, 1 - l % 2);
    std::size_t in = d;
    for (int k = 0; k < config.conditioner_depth; ++k) {
      layer.hidden_weights.push_back(take({in, h}));
      layer.hidden_biases.push_back(take({h}));
      in = h;
    }
    layer.scale_weight = take({h, d});
    layer.scale_bias = take({d});
    layer.shift_weight = take({h, d});
    layer.shift_bias = take({d});
    f.layers.push_back(std::move(layer));
  }
  return f;
}

std::vector<Tensor> make_tensors(const FlowConfig& config, Rng* rng) {
  const std::size_t d = config.dim;
  const std::size_t h = config.hidden;
  std::vector<Tensor> t;
  for (int l = 0; l < config.layers; ++l) {
    std::size_t in = d;
    for (int k = 0; k < config.conditioner_depth; ++k) {
      Tensor w({in, h});
      if (rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + h));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& v : w.data()) v = u(*rng);
      }
      t.push_back(std::move(w));
      t.emplace_back(Shape{h});
      in = h;
    }
    t.emplace_back(Shape{h, d});
    t.emplace_back(Shape{d});
    t.emplace_back(Shape{h, d});
    t.emplace_back(Shape{d});
  }
  return t;
}

struct ScaleShift {
  ad::Var s;
  ad::Var t;
};

ScaleShift conditioner(const CouplingLayer& layer, double s_max, const ad::Var& kept) {
  ad::Var h = kept;
  for (std::size_t k = 0; k < layer.hidden_weights.size(); ++k) {
    h = ad::tanh(ad::affine(h, layer.hidden_weights[k], layer.hidden_biases[k]));
  }
  const ad::Var inv = ad::constant(layer.inverse_mask);
  ad::Var s = ad::scale(ad::tanh(ad::affine(h, layer.scale_weight, layer.scale_bias)), s_max) * inv;
  ad::Var t = ad::affine(h, layer.shift_weight, layer.shift_bias) * inv;
  return {s, t};
}

void check_input(const FlowParams& flow, const ad::Var& v, const char* op) {
  if (v.value().rank() != 2 || v.value().cols() != static_cast<std::size_t>(flow.config.dim)) {
    throw InvalidArgument(std::string(op) + ": expected (n x " + std::to_string(flow.config.dim) +
                          ") input, got " + v.value().shape_str());
  }
}

}  // namespace

void FlowConfig::validate() const {
  if (dim < 2) throw InvalidArgument("FlowConfig: dim must be >= 2");
  if (layers < 1 || hidden < 1 || conditioner_depth < 1) {
    throw InvalidArgument("FlowConfig: layers, hidden and conditioner depth must be >= 1");
  }
  if (!(s_max > 0.0) || !std::isfinite(s_max)) throw InvalidArgument("FlowConfig: s_max must be > 0");
}

std::vector<ad::Var> FlowParams::all() const {
  std::vector<ad::Var> out;
  for (const CouplingLayer& l : layers) {
    for (std::size_t k = 0; k < l.hidden_weights.size(); ++k) {
      out.push_back(l.hidden_weights[k]);
      out.push_back(l.hidden_biases[k]);
    }
    out.push_back(l.scale_weight);
    out.push_back(l.scale_bias);
    out.push_back(l.shift_weight);
    out.push_back(l.shift_bias);
  }
  return out;
}

std::vector<Tensor> FlowParams::values() const {
  std::vector<Tensor> out;
  for (const ad::Var& v : all()) out.push_back(v.value());
  return out;
}

FlowParams FlowParams::clone() const { return from_tensors(config, values(), true); }

FlowParams FlowParams::frozen() const { return from_tensors(config, values(), false); }

FlowParams init_flow(const FlowConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  return from_tensors(config, make_tensors(config, &rng), true);
}

FlowParams zero_flow(const FlowConfig& config) {
  config.validate();
  return from_tensors(config, make_tensors(config, nullptr), true);
}

FlowResult flow_forward(const FlowParams& flow, const ad::Var& z) {
  check_input(flow, z, "flow_forward");
  ad::Var x = z;
  ad::Var logdet;
  for (const CouplingLayer& layer : flow.layers) {
    const ad::Var kept = x * ad::constant(layer.mask);
    const auto [s, t] = conditioner(layer, flow.config.s_max, kept);
    x = x * ad::exp(s) + t;
    const ad::Var ld = ad::sum_last(s);
    logdet = logdet.defined() ? logdet + ld : ld;
  }
  return {x, logdet};
}

FlowResult flow_inverse(const FlowParams& flow, const ad::Var& x) {
  check_input(flow, x, "flow_inverse");
  ad::Var z = x;
  ad::Var logdet;
  for (auto it = flow.layers.rbegin(); it != flow.layers.rend(); ++it) {
    const ad::Var kept = z * ad::constant(it->mask);
    const auto [s, t] = conditioner(*it, flow.config.s_max, kept);
    z = (z - t) * ad::exp(ad::neg(s));
    const ad::Var ld = ad::neg(ad::sum_last(s));
    logdet = logdet.defined() ? logdet + ld : ld;
  }
  return {z, logdet};
}

ad::Var base_log_prob(const ad::Var& z) {
  const double d = static_cast<double>(z.value().cols());
  return ad::add_scalar(ad::scale(ad::sum_last(z * z), -0.5),
                        -0.5 * d * std::log(2.0 * std::numbers::pi));
}

ad::Var log_prob(const FlowParams& flow, const ad::Var& x) {
  const FlowResult inv = flow_inverse(flow, x);
  return base_log_prob(inv.out) + inv.logdet;
}

ad::Var sample(const FlowParams& flow, Rng& rng, std::size_t n) {
  if (n == 0) throw InvalidArgument("flow sample: need at least one draw");
  std::normal_distribution<double> unit(0.0, 1.0);
  Tensor z({n, static_cast<std::size_t>(flow.config.dim)});
  for (double& v : z.data()) v = unit(rng);
  return flow_forward(flow, ad::constant(std::move(z))).out;
}

ad::Var sample_patch(const FlowParams& flow, Rng& rng, int side) {
  if (side < 1) throw InvalidArgument("sample_patch: side must be >= 1");
  return sample(flow, rng, static_cast<std::size_t>(side) * side);
}

ad::Var sample_patch(const FlowParams& flow, std::uint64_t seed, int side) {
  Rng rng(seed);
  return sample_patch(flow, rng, side);
}

void write_flow(std::ostream& os, const FlowParams& flow) {
  io::write_magic(os, kMagic);
  io::write_le<std::uint32_t>(os, kVersion);
  const FlowConfig& c = flow.config;
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.dim));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.layers));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.hidden));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.conditioner_depth));
  io::write_le<double>(os, c.s_max);
  io::write_tensor_table(os, flow.values());
}

FlowParams read_flow(std::istream& is) {
  io::expect_magic(is, kMagic, "flow checkpoint");
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kVersion) {
    throw FormatError("flow checkpoint: unsupported version " + std::to_string(version));
  }
  FlowConfig c;
  c.dim = static_cast<int>(io::read_le<std::uint32_t>(is));
  c.layers = static_cast<int>(io::read_le<std::uint32_t>(is));
  c.hidden = static_cast<int>(io::read_le<std::uint32_t>(is));
  c.conditioner_depth = static_cast<int>(io::read_le<std::uint32_t>(is));
  c.s_max = io::read_le<double>(is);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("flow checkpoint: ") + e.what());
  }
  return from_tensors(c, io::read_tensor_table(is), true);
}

void save_flow(const std::string& path, const FlowParams& flow) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_flow(os, flow);
  if (!os) throw IoError("write to '" + path + "' failed");
}

FlowParams load_flow(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_flow(is);
}

}  // namespace synthneg::flow
