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


// Experiment configuration and its flat `key = value` text form.
//
// Desk-scale defaults are the values below; the reference-scale values they
// replace are listed next to each key in configs/default.cfg.

#ifndef SYNTHNEG_CONFIG_HPP_
#define SYNTHNEG_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "synthneg/flow.hpp"
#include "synthneg/losses.hpp"
#include "synthneg/scores.hpp"
#include "synthneg/segnet.hpp"
#include "synthneg/toydata.hpp"

namespace synthneg::train {

struct ExperimentConfig {
  loss::VariantConfig variant = loss::VariantConfig::make(loss::Variant::kNFHybridLdLx);
  std::uint64_t seed = 1;

  // Toy benchmark.
  int scene_height = 64;
  int scene_width = 64;
  int feature_dim = 8;
  int classes = 4;
  data::Layout layout = data::Layout::kVoronoi;
  data::BenchmarkGeometry geometry;
  int train_scenes = 32;
  int test_scenes = 16;
  int anomaly_size = 12;  // side of the square test anomaly

  data::AugmentParams augment{0.75, 2.0, 48, data::FlipMode::kRandom};
  double paste_min_frac = 0.02;  // patch side as a fraction of the crop side
  double paste_max_frac = 0.28;

  loss::LossWeights weights;
  double temperature = score::kDefaultTemperature;
  std::vector<score::ScoreKind> scores;  // empty = variant default

  int epochs_1 = 30;
  int epochs_2 = 15;
  int batch = 8;

  double seg_lr_max = 1e-3;
  double seg_lr_min = 1e-5;
  seg::SegNetConfig seg;

  double flow_lr = 1e-3;
  int flow_pretrain_steps = 300;
  double flow_pretrain_lr = 1e-2;
  double flow_warmup_frac = 0.2;
  int flow_crop = 8;
  flow::FlowConfig flow;

  double open_tpr = 0.95;

  // Applies one key; throws InvalidArgument for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void set_variant(loss::Variant v);
  void validate() const;

  std::vector<score::ScoreKind> score_kinds() const;
  data::Benchmark benchmark() const;

  // Canonical `key = value` lines, sorted by key.
  std::string to_string() const;
  // 16 hex digits of FNV-1a over to_string().
  std::string fingerprint() const;
  // Fingerprint of the keys phase 1 depends on.
  std::string phase1_fingerprint() const;
  // Fingerprint of the keys the flow pretraining depends on.
  std::string flow_pretrain_fingerprint() const;
};

std::vector<score::ScoreKind> default_scores(loss::Variant v);

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");
ExperimentConfig load_config(const std::string& path);

std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace synthneg::train

#endif  // SYNTHNEG_CONFIG_HPP_
