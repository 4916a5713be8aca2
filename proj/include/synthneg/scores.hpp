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

// Per-pixel anomaly scores. Every map is oriented so that higher means more
// anomalous.
//
//   OP     P(d_out | x) at temperature T
//   OPxMS  P(d_out | x) * (1 - max_c P(c | x)), both at temperature T
//   DH     ln P(d_out | x) - logsumexp(class logits), no temperature
//   JSD    ln 2 - JSD(P(. | x; T) || uniform)

#ifndef SYNTHNEG_SCORES_HPP_
#define SYNTHNEG_SCORES_HPP_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "synthneg/segnet.hpp"

namespace synthneg::score {

enum class ScoreKind { kOP, kOPxMS, kDH, kJSD };

inline constexpr double kDefaultTemperature = 2.0;

const char* score_name(ScoreKind k);
// "OP", "OPxMS" (also "OP×MS", "opms"), "DH", "JSD"; case-insensitive.
ScoreKind parse_score(const std::string& name);
std::vector<ScoreKind> parse_score_list(const std::string& csv);
std::vector<ScoreKind> all_scores();

struct ScoreMap {
  int height = 0;
  int width = 0;
  ScoreKind kind = ScoreKind::kOP;
  double temperature = 1.0;
  std::vector<double> values;  // H*W, row-major

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  void validate() const;
  friend bool operator==(const ScoreMap&, const ScoreMap&) = default;
};

ScoreMap score_op(const seg::PixelPrediction& pred, double temperature = kDefaultTemperature);
ScoreMap score_op_ms(const seg::PixelPrediction& pred, double temperature = kDefaultTemperature);
ScoreMap score_dh(const seg::PixelPrediction& pred);
ScoreMap score_jsd(const seg::PixelPrediction& pred, double temperature = kDefaultTemperature);

// Dispatch; `temperature` is ignored for DH.
ScoreMap compute_score(const seg::PixelPrediction& pred, ScoreKind kind, double temperature);

// JS divergence of one probability row against the uniform distribution.
double jsd_uniform(std::span<const double> p);

// Flat binary raster:
//   "SNSM" u32 version=1, u32 H, u32 W, u32 kind, f64 temperature, H*W f64.
void write_score_map(std::ostream& os, const ScoreMap& map);
ScoreMap read_score_map(std::istream& is);
void save_score_map(const std::string& path, const ScoreMap& map);
ScoreMap load_score_map(const std::string& path);
// One row of space-separated values per line.
void write_score_text(std::ostream& os, const ScoreMap& map);

}  // namespace synthneg::score

#endif  // SYNTHNEG_SCORES_HPP_
