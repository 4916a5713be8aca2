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

// Per-pixel classifier: a shared MLP trunk feeding a K-way class head and a
// two-way (in, out) outlier head. The class logits double as the log of an
// unnormalised joint density, so logsumexp over classes gives ln p̂(x) up to
// a constant.

#ifndef SYNTHNEG_SEGNET_HPP_
#define SYNTHNEG_SEGNET_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "synthneg/autodiff.hpp"

namespace synthneg::seg {

enum class Activation { kTanh, kRelu };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct SegNetConfig {
  int feature_dim = 8;
  int hidden = 64;
  int layers = 2;
  int classes = 4;
  Activation activation = Activation::kTanh;

  void validate() const;
};

// Column 0 of the outlier head is d_in, column 1 is d_out.
inline constexpr std::size_t kInlierColumn = 0;
inline constexpr std::size_t kOutlierColumn = 1;

struct SegNetParams {
  SegNetConfig config;
  std::vector<ad::Var> trunk_weights;  // layer i: (in x hidden)
  std::vector<ad::Var> trunk_biases;   // layer i: (hidden)
  ad::Var class_weight;                // hidden x K
  ad::Var class_bias;                  // K
  ad::Var ood_weight;                  // hidden x 2
  ad::Var ood_bias;                    // 2

  // Declaration order: trunk (w, b per layer), class head, outlier head.
  std::vector<ad::Var> all() const;
  std::vector<ad::Var> outlier_head() const { return {ood_weight, ood_bias}; }
  std::vector<Tensor> values() const;

  // Independent copy of every tensor (fresh graph leaves).
  SegNetParams clone() const;
};

// Glorot-uniform weights, zero biases.
SegNetParams init_segnet(const SegNetConfig& config, std::uint64_t seed);
SegNetParams zero_segnet(const SegNetConfig& config);

struct PixelPrediction {
  int height = 0;
  int width = 0;
  ad::Var class_logits;  // (H*W) x K
  ad::Var ood_logits;    // (H*W) x 2

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

// features: (H*W) x D. With detach_params the parameters enter the graph as
// constants, so gradients reach the features but never the network.
PixelPrediction forward(const SegNetParams& params, const ad::Var& features, int height,
                        int width, bool detach_params = false);
PixelPrediction forward(const SegNetParams& params, const Tensor& features, int height, int width);

// H x W x K, softmax(class_logits / T).
Tensor class_posterior(const PixelPrediction& pred, double temperature);
// H x W x 2, softmax(ood_logits / T).
Tensor ood_posterior(const PixelPrediction& pred, double temperature);
// H x W, logsumexp over class logits.
Tensor log_density(const PixelPrediction& pred);
// H*W argmax class indices.
std::vector<int> predicted_classes(const PixelPrediction& pred);

// Versioned flat-binary checkpoint:
//   "SNSG" u32 version=1, u32 D, u32 hidden, u32 layers, u32 K, u32 activation,
//   tensor table in all() order.
void write_segnet(std::ostream& os, const SegNetParams& params);
SegNetParams read_segnet(std::istream& is);
void save_segnet(const std::string& path, const SegNetParams& params);
SegNetParams load_segnet(const std::string& path);

}  // namespace synthneg::seg

#endif  // SYNTHNEG_SEGNET_HPP_
