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

#include "synthneg/segnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "synthneg/binary_io.hpp"
#include "synthneg/error.hpp"
#include "synthneg/random.hpp"

namespace synthneg::seg {

namespace {

constexpr char kMagic[5] = "SNSG";
constexpr std::uint32_t kVersion = 1;

Tensor glorot(Rng& rng, std::size_t in, std::size_t out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t({in, out});
  for (double& v : t.data()) v = u(rng);
  return t;
}

SegNetParams from_tensors(const SegNetConfig& config, std::vector<Tensor> tensors) {
  const std::size_t expected = 2 * static_cast<std::size_t>(config.layers) + 4;
  if (tensors.size() != expected) {
    throw FormatError("segnet: expected " + std::to_string(expected) + " tensors, got " +
                      std::to_string(tensors.size()));
  }
  SegNetParams p;
  p.config = config;
  std::size_t in = config.feature_dim;
  const std::size_t h = config.hidden;
  std::size_t i = 0;
  auto take = [&](const Shape& shape) {
    Tensor& t = tensors[i++];
    if (t.shape() != shape) {
      throw FormatError("segnet: tensor " + std::to_string(i - 1) + " has shape " + t.shape_str() +
                        ", expected " + shape_string(shape));
    }
    return ad::parameter(std::move(t));
  };
  for (int l = 0; l < config.layers; ++l) {
    p.trunk_weights.push_back(take({in, h}));
    p.trunk_biases.push_back(take({h}));
    in = h;
  }
  const std::size_t k = config.classes;
  p.class_weight = take({h, k});
  p.class_bias = take({k});
  p.ood_weight = take({h, 2});
  p.ood_bias = take({2});
  return p;
}

std::vector<Tensor> zero_tensors(const SegNetConfig& config) {
  std::vector<Tensor> t;
  std::size_t in = config.feature_dim;
  const std::size_t h = config.hidden;
  for (int l = 0; l < config.layers; ++l) {
    t.emplace_back(Shape{in, h});
    t.emplace_back(Shape{h});
    in = h;
  }
  t.emplace_back(Shape{h, static_cast<std::size_t>(config.classes)});
  t.emplace_back(Shape{static_cast<std::size_t>(config.classes)});
  t.emplace_back(Shape{h, 2});
  t.emplace_back(Shape{2});
  return t;
}

Tensor permute_hw(const Tensor& flat, int height, int width) {
  return flat.reshaped({static_cast<std::size_t>(height), static_cast<std::size_t>(width),
                        flat.cols()});
}

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw InvalidArgument("temperature must be finite and > 0, got " + std::to_string(t));
  }
}

Tensor scaled(const Tensor& x, double temperature) {
  Tensor out = x;
  for (double& v : out.data()) v /= temperature;
  return out;
}

}  // namespace

const char* activation_name(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw InvalidArgument("unknown activation '" + name + "' (expected tanh or relu)");
}

void SegNetConfig::validate() const {
  if (feature_dim < 1 || hidden < 1 || layers < 1 || classes < 2) {
    throw InvalidArgument("SegNetConfig: need feature_dim, hidden, layers >= 1 and classes >= 2");
  }
}

std::vector<ad::Var> SegNetParams::all() const {
  std::vector<ad::Var> out;
  for (std::size_t i = 0; i < trunk_weights.size(); ++i) {
    out.push_back(trunk_weights[i]);
    out.push_back(trunk_biases[i]);
  }
  out.push_back(class_weight);
  out.push_back(class_bias);
  out.push_back(ood_weight);
  out.push_back(ood_bias);
  return out;
}

std::vector<Tensor> SegNetParams::values() const {
  std::vector<Tensor> out;
  for (const ad::Var& v : all()) out.push_back(v.value());
  return out;
}

SegNetParams SegNetParams::clone() const { return from_tensors(config, values()); }

SegNetParams init_segnet(const SegNetConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<Tensor> t;
  std::size_t in = config.feature_dim;
  const std::size_t h = config.hidden;
  for (int l = 0; l < config.layers; ++l) {
    t.push_back(glorot(rng, in, h));
    t.emplace_back(Shape{h});
    in = h;
  }
  t.push_back(glorot(rng, h, config.classes));
  t.emplace_back(Shape{static_cast<std::size_t>(config.classes)});
  t.push_back(glorot(rng, h, 2));
  t.emplace_back(Shape{2});
  return from_tensors(config, std::move(t));
}

SegNetParams zero_segnet(const SegNetConfig& config) {
  config.validate();
  return from_tensors(config, zero_tensors(config));
}

PixelPrediction forward(const SegNetParams& params, const ad::Var& features, int height,
                        int width, bool detach_params) {
  const auto& x = features.value();
  if (x.rank() != 2 || x.cols() != static_cast<std::size_t>(params.config.feature_dim)) {
    throw InvalidArgument("segnet forward: expected (pixels x " +
                          std::to_string(params.config.feature_dim) + ") features, got " +
                          x.shape_str());
  }
  if (x.rows() != static_cast<std::size_t>(height) * width) {
    throw InvalidArgument("segnet forward: " + std::to_string(x.rows()) +
                          " feature rows for a " + std::to_string(height) + "x" +
                          std::to_string(width) + " grid");
  }
  auto use = [detach_params](const ad::Var& p) { return detach_params ? ad::stop_gradient(p) : p; };
  ad::Var h = features;
  for (std::size_t l = 0; l < params.trunk_weights.size(); ++l) {
    h = ad::affine(h, use(params.trunk_weights[l]), use(params.trunk_biases[l]));
    h = params.config.activation == Activation::kTanh ? ad::tanh(h) : ad::relu(h);
  }
  PixelPrediction out;
  out.height = height;
  out.width = width;
  out.class_logits = ad::affine(h, use(params.class_weight), use(params.class_bias));
  out.ood_logits = ad::affine(h, use(params.ood_weight), use(params.ood_bias));
  return out;
}

PixelPrediction forward(const SegNetParams& params, const Tensor& features, int height,
                        int width) {
  return forward(params, ad::constant(features), height, width, true);
}

Tensor class_posterior(const PixelPrediction& pred, double temperature) {
  check_temperature(temperature);
  return permute_hw(softmax_rows(scaled(pred.class_logits.value(), temperature)), pred.height,
                    pred.width);
}

Tensor ood_posterior(const PixelPrediction& pred, double temperature) {
  check_temperature(temperature);
  return permute_hw(softmax_rows(scaled(pred.ood_logits.value(), temperature)), pred.height,
                    pred.width);
}

Tensor log_density(const PixelPrediction& pred) {
  return logsumexp_rows(pred.class_logits.value())
      .reshaped({static_cast<std::size_t>(pred.height), static_cast<std::size_t>(pred.width)});
}

std::vector<int> predicted_classes(const PixelPrediction& pred) {
  const Tensor& z = pred.class_logits.value();
  std::vector<int> out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

void write_segnet(std::ostream& os, const SegNetParams& params) {
  io::write_magic(os, kMagic);
  io::write_le<std::uint32_t>(os, kVersion);
  const SegNetConfig& c = params.config;
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.feature_dim));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.hidden));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.layers));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.classes));
  io::write_le<std::uint32_t>(os, c.activation == Activation::kTanh ? 0u : 1u);
  io::write_tensor_table(os, params.values());
}

SegNetParams read_segnet(std::istream& is) {
  io::expect_magic(is, kMagic, "segnet checkpoint");
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kVersion) {
    throw FormatError("segnet checkpoint: unsupported version " + std::to_string(version));
  }
  SegNetConfig c;
  c.feature_dim = static_cast<int>(io::read_le<std::uint32_t>(is));
  c.hidden = static_cast<int>(io::read_le<std::uint32_t>(is));
  c.layers = static_cast<int>(io::read_le<std::uint32_t>(is));
  c.classes = static_cast<int>(io::read_le<std::uint32_t>(is));
  const auto act = io::read_le<std::uint32_t>(is);
  if (act > 1) throw FormatError("segnet checkpoint: unknown activation code");
  c.activation = act == 0 ? Activation::kTanh : Activation::kRelu;
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("segnet checkpoint: ") + e.what());
  }
  return from_tensors(c, io::read_tensor_table(is));
}

void save_segnet(const std::string& path, const SegNetParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_segnet(os, params);
  if (!os) throw IoError("write to '" + path + "' failed");
}

SegNetParams load_segnet(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_segnet(is);
}

}  // namespace synthneg::seg
