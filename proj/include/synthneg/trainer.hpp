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


// Two-phase training, evaluation and the resumable experiment grid.
//
// Phase 1 fits the classifier alone (L_cls, Adam at seg.lr_max). Phase 2
// pastes one negative patch into every crop of every batch and minimises
// L_seg, plus L_flow for flow-backed variants, with the segmentation learning
// rate on a cosine schedule and the flow on Adamax. The flow is fitted to
// inlier crops by maximum likelihood before phase 2 (flow.pretrain_steps) and
// sees L_mle only during the first flow.warmup_frac of phase 2.

#ifndef SYNTHNEG_TRAINER_HPP_
#define SYNTHNEG_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "synthneg/config.hpp"
#include "synthneg/eval.hpp"
#include "synthneg/flow.hpp"
#include "synthneg/segnet.hpp"
#include "synthneg/toydata.hpp"

namespace synthneg::train {

struct EpochLosses {
  double cls = 0.0;
  double d = 0.0;  // L_d_in + L_d_out
  double x = 0.0;
  double mle = 0.0;
  double jsd = 0.0;  // flow-side JSD, or the classifier-side one for NFLOWJS
};

struct RunRecord {
  std::string fingerprint;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<EpochLosses> losses;  // one entry per epoch, phase 1 then phase 2
  eval::EvalReport report;
  std::vector<std::string> checkpoints;
  std::uint64_t train_steps = 0;  // optimizer steps actually taken in this call
  double wall_seconds = 0.0;
  // Mean ln p̂ over held-out inlier pixels and over freshly pasted negatives.
  double inlier_log_density = 0.0;
  double negative_log_density = 0.0;

  // key = value text; wall-clock on its own line so callers can drop it.
  std::string to_text() const;
};

struct TrainedModel {
  seg::SegNetParams seg;
  std::optional<flow::FlowParams> flow;
};

struct TrainOptions {
  std::string out_dir;       // checkpoints and record files; empty = keep in memory
  std::string cache_dir;     // reuse phase-1 / flow-pretraining results across variants
  bool evaluate = true;      // fill RunRecord::report
  std::optional<eval::BenchOptions> bench;
  std::function<void(const std::string&)> progress;  // one line per epoch
};

struct TrainResult {
  RunRecord record;
  TrainedModel model;
};

struct Dataset {
  std::vector<data::Scene> train;
  std::vector<data::Scene> test;  // with injected anomalies
};

Dataset make_dataset(const ExperimentConfig& cfg);

TrainResult train(const ExperimentConfig& cfg, const TrainOptions& options = {});

eval::EvalReport evaluate(const seg::SegNetParams& model, std::span<const data::Scene> test,
                          const ExperimentConfig& cfg,
                          const std::optional<eval::BenchOptions>& bench = std::nullopt);
eval::EvalReport evaluate_checkpoint(const std::string& seg_checkpoint,
                                     std::span<const data::Scene> test, const ExperimentConfig& cfg,
                                     const std::optional<eval::BenchOptions>& bench = std::nullopt);

// Mean ln p̂ on inlier pixels of `test` and on negatives drawn from the
// variant's source, pasted through the same sampling as phase 2.
std::pair<double, double> energy_gap(const TrainedModel& model, const ExperimentConfig& cfg,
                                     std::span<const data::Scene> test);

struct GridRow {
  std::string fingerprint;
  std::string variant;
  std::uint64_t seed = 0;
  bool resumed = false;
  std::string error;  // non-empty when the run failed
  std::vector<eval::MetricRow> rows;
};

struct GridResult {
  std::vector<GridRow> runs;
  std::uint64_t train_steps = 0;

  // Columns: method, auxiliary data, score, metrics.
  std::string to_table() const;
  std::string to_csv() const;
};

// Runs each config under out_dir/<fingerprint>/, skipping those that already
// hold a completed record. Failures are recorded and the grid continues.
GridResult run_grid(std::span<const ExperimentConfig> configs, const std::string& out_dir,
                    const TrainOptions& options = {});

// The seven variants over a base config.
std::vector<ExperimentConfig> default_grid(const ExperimentConfig& base);

// Writes train_NNN.snsc and test_NNN.snsc under dir; returns the paths.
std::vector<std::string> write_dataset(const ExperimentConfig& cfg, const std::string& dir);

}  // namespace synthneg::train

#endif  // SYNTHNEG_TRAINER_HPP_
