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


#include "synthneg/scores.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "synthneg/binary_io.hpp"
#include "synthneg/error.hpp"

namespace synthneg::score {

namespace {

constexpr char kMagic[5] = "SNSM";
constexpr std::uint32_t kVersion = 1;

void check_temperature(double t, const char* op) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw InvalidArgument(std::string(op) + ": temperature must be > 0");
  }
}

ScoreMap blank(const seg::PixelPrediction& pred, ScoreKind kind, double temperature) {
  ScoreMap m;
  m.height = pred.height;
  m.width = pred.width;
  m.kind = kind;
  m.temperature = temperature;
  m.values.resize(pred.pixels());
  return m;
}

// ln softmax(row / t)[col]
double log_softmax_at(std::span<const double> row, double t, std::size_t col) {
  double hi = -INFINITY;
  for (double v : row) hi = std::max(hi, v / t);
  double acc = 0.0;
  for (double v : row) acc += std::exp(v / t - hi);
  return row[col] / t - hi - std::log(acc);
}

}  // namespace

const char* score_name(ScoreKind k) {
  switch (k) {
    case ScoreKind::kOP:
      return "OP";
    case ScoreKind::kOPxMS:
      return "OPxMS";
    case ScoreKind::kDH:
      return "DH";
    case ScoreKind::kJSD:
      return "JSD";
  }
  return "?";
}

ScoreKind parse_score(const std::string& name) {
  std::string key;
  for (unsigned char ch : name) {
    if (std::isalnum(ch)) key.push_back(static_cast<char>(std::toupper(ch)));
  }
  if (key == "OP") return ScoreKind::kOP;
  if (key == "OPXMS" || key == "OPMS") return ScoreKind::kOPxMS;
  if (key == "DH") return ScoreKind::kDH;
  if (key == "JSD") return ScoreKind::kJSD;
  throw InvalidArgument("unknown score kind '" + name + "'");
}

std::vector<ScoreKind> parse_score_list(const std::string& csv) {
  std::vector<ScoreKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const ScoreKind k = parse_score(item);
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  if (out.empty()) throw InvalidArgument("empty score list");
  return out;
}

std::vector<ScoreKind> all_scores() {
  return {ScoreKind::kOP, ScoreKind::kOPxMS, ScoreKind::kDH, ScoreKind::kJSD};
}

void ScoreMap::validate() const {
  if (height < 1 || width < 1) throw InvalidArgument("ScoreMap: empty raster");
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw InvalidArgument("ScoreMap: value count does not match H*W");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("ScoreMap ") + score_name(kind) +
                                              ": non-finite value");
  }
}

double jsd_uniform(std::span<const double> p) {
  const double u = 1.0 / static_cast<double>(p.size());
  double kl_p = 0.0;
  double kl_u = 0.0;
  for (double pi : p) {
    const double m = 0.5 * pi + 0.5 * u;
    if (pi > 0.0) kl_p += pi * std::log(pi / m);
    kl_u += u * std::log(u / m);
  }
  return 0.5 * (kl_p + kl_u);
}

ScoreMap score_op(const seg::PixelPrediction& pred, double temperature) {
  check_temperature(temperature, "score_op");
  ScoreMap m = blank(pred, ScoreKind::kOP, temperature);
  const Tensor& ood = pred.ood_logits.value();
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    m.values[i] = std::exp(log_softmax_at(ood.row(i), temperature, seg::kOutlierColumn));
  }
  m.validate();
  return m;
}

ScoreMap score_op_ms(const seg::PixelPrediction& pred, double temperature) {
  check_temperature(temperature, "score_op_ms");
  ScoreMap m = blank(pred, ScoreKind::kOPxMS, temperature);
  const Tensor& ood = pred.ood_logits.value();
  const Tensor& cls = pred.class_logits.value();
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const auto row = cls.row(i);
    const std::size_t top =
        static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const double max_softmax = std::exp(log_softmax_at(row, temperature, top));
    const double p_out = std::exp(log_softmax_at(ood.row(i), temperature, seg::kOutlierColumn));
    m.values[i] = p_out * (1.0 - max_softmax);
  }
  m.validate();
  return m;
}

ScoreMap score_dh(const seg::PixelPrediction& pred) {
  ScoreMap m = blank(pred, ScoreKind::kDH, 1.0);
  const Tensor& ood = pred.ood_logits.value();
  const Tensor& cls = pred.class_logits.value();
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const auto row = cls.row(i);
    const double hi = *std::max_element(row.begin(), row.end());
    double acc = 0.0;
    for (double v : row) acc += std::exp(v - hi);
    const double log_density = hi + std::log(acc);
    m.values[i] = log_softmax_at(ood.row(i), 1.0, seg::kOutlierColumn) - log_density;
  }
  m.validate();
  return m;
}

ScoreMap score_jsd(const seg::PixelPrediction& pred, double temperature) {
  check_temperature(temperature, "score_jsd");
  ScoreMap m = blank(pred, ScoreKind::kJSD, temperature);
  const Tensor post = seg::class_posterior(pred, temperature);
  const std::size_t k = post.cols();
  const auto data = post.data();
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const double j = jsd_uniform(data.subspan(i * k, k));
    m.values[i] = std::clamp(std::numbers::ln2 - j, 0.0, std::numbers::ln2);
  }
  m.validate();
  return m;
}

ScoreMap compute_score(const seg::PixelPrediction& pred, ScoreKind kind, double temperature) {
  switch (kind) {
    case ScoreKind::kOP:
      return score_op(pred, temperature);
    case ScoreKind::kOPxMS:
      return score_op_ms(pred, temperature);
    case ScoreKind::kDH:
      return score_dh(pred);
    case ScoreKind::kJSD:
      return score_jsd(pred, temperature);
  }
  throw InvalidArgument("compute_score: unknown kind");
}

void write_score_map(std::ostream& os, const ScoreMap& map) {
  map.validate();
  io::write_magic(os, kMagic);
  io::write_le<std::uint32_t>(os, kVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.height));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.width));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.kind));
  io::write_le<double>(os, map.temperature);
  for (double v : map.values) io::write_le<double>(os, v);
}

ScoreMap read_score_map(std::istream& is) {
  io::expect_magic(is, kMagic, "score map");
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kVersion) throw FormatError("score map: unsupported version " + std::to_string(version));
  ScoreMap m;
  m.height = static_cast<int>(io::read_le<std::uint32_t>(is));
  m.width = static_cast<int>(io::read_le<std::uint32_t>(is));
  const auto kind = io::read_le<std::uint32_t>(is);
  if (kind > static_cast<std::uint32_t>(ScoreKind::kJSD)) throw FormatError("score map: bad kind");
  m.kind = static_cast<ScoreKind>(kind);
  m.temperature = io::read_le<double>(is);
  if (m.height < 1 || m.width < 1 || m.height > (1 << 16) || m.width > (1 << 16)) {
    throw FormatError("score map: bad raster size");
  }
  m.values.resize(static_cast<std::size_t>(m.height) * m.width);
  for (double& v : m.values) v = io::read_le<double>(is);
  try {
    m.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("score map: ") + e.what());
  }
  return m;
}

void save_score_map(const std::string& path, const ScoreMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_score_map(os, map);
  if (!os) throw IoError("write to '" + path + "' failed");
}

ScoreMap load_score_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_score_map(is);
}

void write_score_text(std::ostream& os, const ScoreMap& map) {
  os << "# " << score_name(map.kind) << " T=" << map.temperature << ' ' << map.height << 'x'
     << map.width << '\n';
  os << std::setprecision(6);
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) os << (c ? " " : "") << map.at(r, c);
    os << '\n';
  }
}

}  // namespace synthneg::score
