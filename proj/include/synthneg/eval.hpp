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


// Pixel-level anomaly metrics, closed- and open-set segmentation quality,
// and the inference throughput benchmark.
//
// Anomaly metrics pool every evaluated pixel of every scene. Positives are
// anomaly pixels; negatives are inlier-labelled pixels. Ignore-labelled
// pixels outside the anomaly mask are excluded.

#ifndef SYNTHNEG_EVAL_HPP_
#define SYNTHNEG_EVAL_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthneg/scores.hpp"
#include "synthneg/segnet.hpp"
#include "synthneg/toydata.hpp"

namespace synthneg::eval {

// labels: nonzero = positive (anomalous). Each rejects inputs without at
// least one positive and one negative, or with mismatched lengths.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);
double fpr_at_tpr(std::span<const double> scores, std::span<const std::uint8_t> labels,
                  double tpr_target = 0.95);

// Threshold used by open_miou: among score values whose TPR reaches the
// target, the lowest one that still attains the minimal FPR.
double open_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels,
                      double tpr_target = 0.95);

struct IoUResult {
  double miou = 0.0;
  std::vector<double> per_class;  // NaN for classes excluded from the mean
  std::vector<std::int64_t> tp, fp, fn;
};

// Inlier pixels only: anomaly-masked and ignore-labelled pixels are skipped.
// Classes absent from both prediction and ground truth are excluded.
IoUResult closed_miou(std::span<const int> pred, std::span<const std::int16_t> labels,
                      std::span<const std::uint8_t> anomaly, int classes);

// Pixels scoring >= threshold are flagged anomalous. Starting from the closed
// confusion counts: a flagged inlier pixel never counts as a true positive
// (it becomes a false negative of its class), and an unflagged anomaly pixel
// adds a false positive to its predicted class.
IoUResult open_miou_at(std::span<const int> pred, std::span<const double> scores,
                       std::span<const std::int16_t> labels, std::span<const std::uint8_t> anomaly,
                       int classes, double threshold);
// Threshold from open_threshold over the evaluated pixels; throws if the
// anomaly mask is empty.
IoUResult open_miou(std::span<const int> pred, std::span<const double> scores,
                    std::span<const std::int16_t> labels, std::span<const std::uint8_t> anomaly,
                    int classes, double tpr_target = 0.95);

// ---------------------------------------------------------------------------
// Throughput.

// OH runs the classifier and argmax only; the others add the outlier head
// where needed and the score map.
enum class BenchKind { kOH, kOP, kOPxMS, kDH, kJSD };
const char* bench_name(BenchKind k);
BenchKind parse_bench(const std::string& name);
BenchKind bench_kind_for(score::ScoreKind k);

struct BenchOptions {
  int repeats = 7;
  int warmup = 3;                    // untimed calls per kind
  double min_repeat_seconds = 0.3;  // per kind and repeat
  double temperature = score::kDefaultTemperature;
};

struct BenchResult {
  BenchKind kind = BenchKind::kOH;
  double median_scenes_per_sec = 0.0;
  double cv = 0.0;  // stddev / mean of the per-repeat rates
  std::vector<double> samples;
};

// Kinds are interleaved scene by scene, and consecutive scenes go to
// different repeats, so drift in machine speed hits every kind and every
// repeat alike. A repeat's rate is scenes processed over time spent; `warmup`
// untimed calls per kind come first.
std::vector<BenchResult> bench_throughput(const seg::SegNetParams& model,
                                          std::span<const BenchKind> kinds,
                                          std::span<const data::Scene> scenes,
                                          const BenchOptions& options = {});
BenchResult bench_throughput(const seg::SegNetParams& model, BenchKind kind,
                             std::span<const data::Scene> scenes, const BenchOptions& options = {});

// Graph-free inference used by evaluation and the benchmark.
struct Inference {
  Tensor class_logits;  // N x K
  Tensor ood_logits;    // N x 2, empty when not requested
};
Inference infer(const seg::SegNetParams& model, const Tensor& features, bool with_ood = true);
seg::PixelPrediction infer_prediction(const seg::SegNetParams& model, const data::Scene& scene);

// ---------------------------------------------------------------------------
// Reports.

struct MetricRow {
  std::string method;
  std::string score;
  double ap = 0.0;
  double fpr95 = 0.0;
  double auroc = 0.0;
  double closed_miou = 0.0;
  double open_miou = 0.0;
  double scenes_per_sec = 0.0;  // NaN when not measured
  bool has_anomaly_metrics = true;
  std::vector<double> closed_per_class;
  std::vector<double> open_per_class;
};

struct EvalReport {
  std::string fingerprint;
  std::vector<MetricRow> rows;

  const MetricRow* find(const std::string& method, const std::string& score) const;
  // key = value, one metric per line, rows separated by a blank line.
  std::string to_text() const;
  std::string to_csv(bool header = true) const;
};

inline constexpr const char* kCsvHeader =
    "method,score,ap,fpr95,auroc,closed_miou,open_miou,scenes_per_sec";

struct EvalOptions {
  std::vector<score::ScoreKind> kinds;
  double temperature = score::kDefaultTemperature;
  double open_tpr = 0.95;
  std::optional<BenchOptions> bench;  // throughput measured when set
};

// Pools pixels over `scenes`. Without anomaly pixels the anomaly metrics are
// skipped with a warning and reported as NaN.
EvalReport evaluate_model(const seg::SegNetParams& model, std::span<const data::Scene> scenes,
                          const std::string& method, const EvalOptions& options);

}  // namespace synthneg::eval

#endif  // SYNTHNEG_EVAL_HPP_
