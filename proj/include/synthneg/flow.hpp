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

// Affine-coupling normalizing flow over R^D with a standard normal base.
//
// Layer l keeps the dims where mask_l = 1 and transforms the others:
//
//   x = m * z + (1 - m) * (z * exp(s(m * z)) + t(m * z))
//   s = s_max * tanh(raw_s) * (1 - m)
//
// Masks alternate between even and odd dims so consecutive layers are
// complementary. log|det J| of the layer is the row sum of s.

#ifndef SYNTHNEG_FLOW_HPP_
#define SYNTHNEG_FLOW_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "synthneg/autodiff.hpp"
#include "synthneg/random.hpp"

namespace synthneg::flow {

struct FlowConfig {
  int dim = 8;
  int layers = 4;
  int hidden = 32;
  int conditioner_depth = 2;
  double s_max = 2.0;

  void validate() const;
};

struct CouplingLayer {
  Tensor mask;          // 1 x D, 1 = passed through
  Tensor inverse_mask;  // 1 x D, 1 = transformed
  std::vector<ad::Var> hidden_weights;
  std::vector<ad::Var> hidden_biases;
  ad::Var scale_weight;  // hidden x D
  ad::Var scale_bias;    // D
  ad::Var shift_weight;  // hidden x D
  ad::Var shift_bias;    // D
};

struct FlowParams {
  FlowConfig config;
  std::vector<CouplingLayer> layers;

  std::vector<ad::Var> all() const;
  std::vector<Tensor> values() const;
  FlowParams clone() const;
  // Same values as constant leaves; gradients never reach them.
  FlowParams frozen() const;
};

// Glorot-uniform hidden layers, zero output layers: the map starts as the
// identity but every weight receives gradient.
FlowParams init_flow(const FlowConfig& config, std::uint64_t seed);
// Every conditioner weight zero.
FlowParams zero_flow(const FlowConfig& config);

struct FlowResult {
  ad::Var out;     // N x D
  ad::Var logdet;  // N x 1
};

FlowResult flow_forward(const FlowParams& flow, const ad::Var& z);
FlowResult flow_inverse(const FlowParams& flow, const ad::Var& x);

// N x 1 log-density of each row.
ad::Var log_prob(const FlowParams& flow, const ad::Var& x);
// N x 1 standard-normal log-density.
ad::Var base_log_prob(const ad::Var& z);

// n i.i.d. base draws pushed through the flow, reparameterised so gradients
// reach the flow parameters.
ad::Var sample(const FlowParams& flow, Rng& rng, std::size_t n);
// side*side x D patch of i.i.d. pixels.
ad::Var sample_patch(const FlowParams& flow, std::uint64_t seed, int side);
ad::Var sample_patch(const FlowParams& flow, Rng& rng, int side);

// Versioned flat-binary checkpoint:
//   "SNFL" u32 version=1, u32 D, u32 layers, u32 hidden, u32 depth, f64 s_max,
//   tensor table in all() order.
void write_flow(std::ostream& os, const FlowParams& flow);
FlowParams read_flow(std::istream& is);
void save_flow(const std::string& path, const FlowParams& flow);
FlowParams load_flow(const std::string& path);

}  // namespace synthneg::flow

#endif  // SYNTHNEG_FLOW_HPP_
