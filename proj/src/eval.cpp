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


#include "synthneg/eval.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "synthneg/error.hpp"

namespace synthneg::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Tie group of a descending score order.
struct Group {
  double score;
  std::int64_t pos;
  std::int64_t neg;
};

struct Counts {
  std::int64_t pos = 0;
  std::int64_t neg = 0;
};

Counts check_binary(std::span<const double> scores, std::span<const std::uint8_t> labels,
                    const char* op) {
  if (scores.size() != labels.size()) {
    throw InvalidArgument(std::string(op) + ": " + std::to_string(scores.size()) + " scores vs " +
                          std::to_string(labels.size()) + " labels");
  }
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InvalidArgument(std::string(op) + ": non-finite score");
    (labels[i] ? c.pos : c.neg)++;
  }
  if (c.pos == 0 || c.neg == 0) {
    throw InvalidArgument(std::string(op) + ": need at least one positive and one negative");
  }
  return c;
}

std::vector<Group> groups_desc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<Group> g;
  for (std::size_t i : order) {
    if (g.empty() || scores[i] != g.back().score) g.push_back({scores[i], 0, 0});
    (labels[i] ? g.back().pos : g.back().neg)++;
  }
  return g;
}

double mean_present(const std::vector<double>& per_class) {
  double sum = 0.0;
  int n = 0;
  for (double v : per_class) {
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  }
  return n ? sum / n : kNaN;
}

void finish_iou(IoUResult& r, const char* op) {
  const std::size_t k = r.tp.size();
  r.per_class.assign(k, kNaN);
  for (std::size_t c = 0; c < k; ++c) {
    const std::int64_t uni = r.tp[c] + r.fp[c] + r.fn[c];
    if (uni == 0) {
      spdlog::debug("{}: class {} absent from prediction and ground truth; excluded", op, c);
      continue;
    }
    r.per_class[c] = static_cast<double>(r.tp[c]) / static_cast<double>(uni);
  }
  r.miou = mean_present(r.per_class);
  if (std::isnan(r.miou)) throw InvalidArgument(std::string(op) + ": no evaluable pixels");
}

void check_dense(std::size_t pred, std::size_t labels, std::size_t anomaly, int classes,
                 const char* op) {
  if (classes < 1) throw InvalidArgument(std::string(op) + ": classes must be >= 1");
  if (pred != labels || (anomaly != 0 && anomaly != labels)) {
    throw InvalidArgument(std::string(op) + ": prediction, label and mask sizes differ");
  }
}

bool masked(std::span<const std::uint8_t> anomaly, std::size_t i) {
  return !anomaly.empty() && anomaly[i] != 0;
}

IoUResult closed_counts(std::span<const int> pred, std::span<const std::int16_t> labels,
                        std::span<const std::uint8_t> anomaly, int classes, const char* op) {
  check_dense(pred.size(), labels.size(), anomaly.size(), classes, op);
  IoUResult r;
  r.tp.assign(classes, 0);
  r.fp.assign(classes, 0);
  r.fn.assign(classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (masked(anomaly, i) || !data::is_inlier_label(labels[i], classes)) continue;
    const int y = labels[i];
    const int p = pred[i];
    if (p < 0 || p >= classes) throw InvalidArgument(std::string(op) + ": predicted class out of range");
    if (p == y) {
      r.tp[y]++;
    } else {
      r.fp[p]++;
      r.fn[y]++;
    }
  }
  return r;
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const Counts c = check_binary(scores, labels, "average_precision");
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  double acc = 0.0;
  for (const Group& g : groups_desc(scores, labels)) {
    tp += g.pos;
    fp += g.neg;
    if (g.pos) acc += static_cast<double>(g.pos) * (static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  return acc / static_cast<double>(c.pos);
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const Counts c = check_binary(scores, labels, "auroc");
  // Twice the Mann-Whitney U: 2 per won pair, 1 per tie.
  std::int64_t u2 = 0;
  std::int64_t neg_below = 0;
  const auto g = groups_desc(scores, labels);
  for (auto it = g.rbegin(); it != g.rend(); ++it) {
    u2 += it->pos * (2 * neg_below + it->neg);
    neg_below += it->neg;
  }
  return static_cast<double>(u2) / (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

double fpr_at_tpr(std::span<const double> scores, std::span<const std::uint8_t> labels,
                  double tpr_target) {
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw InvalidArgument("fpr_at_tpr: target must lie in (0, 1]");
  }
  const Counts c = check_binary(scores, labels, "fpr_at_tpr");
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  for (const Group& g : groups_desc(scores, labels)) {
    tp += g.pos;
    fp += g.neg;
    if (static_cast<double>(tp) / static_cast<double>(c.pos) >= tpr_target) {
      return static_cast<double>(fp) / static_cast<double>(c.neg);
    }
  }
  return 1.0;
}

double open_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels,
                      double tpr_target) {
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw InvalidArgument("open_threshold: target must lie in (0, 1]");
  }
  const Counts c = check_binary(scores, labels, "open_threshold");
  const auto groups = groups_desc(scores, labels);
  std::int64_t tp = 0;
  std::size_t i = 0;
  for (; i < groups.size(); ++i) {
    tp += groups[i].pos;
    if (static_cast<double>(tp) / static_cast<double>(c.pos) >= tpr_target) break;
  }
  // Lower the threshold while no further negative is admitted.
  while (i + 1 < groups.size() && groups[i + 1].neg == 0) ++i;
  return groups[i].score;
}

IoUResult closed_miou(std::span<const int> pred, std::span<const std::int16_t> labels,
                      std::span<const std::uint8_t> anomaly, int classes) {
  IoUResult r = closed_counts(pred, labels, anomaly, classes, "closed_miou");
  finish_iou(r, "closed_miou");
  return r;
}

IoUResult open_miou_at(std::span<const int> pred, std::span<const double> scores,
                       std::span<const std::int16_t> labels, std::span<const std::uint8_t> anomaly,
                       int classes, double threshold) {
  if (scores.size() != labels.size()) throw InvalidArgument("open_miou: score map size mismatch");
  IoUResult r = closed_counts(pred, labels, anomaly, classes, "open_miou");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool flagged = scores[i] >= threshold;
    if (masked(anomaly, i)) {
      if (!flagged) {
        const int p = pred[i];
        if (p < 0 || p >= classes) throw InvalidArgument("open_miou: predicted class out of range");
        r.fp[p]++;
      }
    } else if (data::is_inlier_label(labels[i], classes) && flagged && pred[i] == labels[i]) {
      r.tp[labels[i]]--;
      r.fn[labels[i]]++;
    }
  }
  finish_iou(r, "open_miou");
  return r;
}

IoUResult open_miou(std::span<const int> pred, std::span<const double> scores,
                    std::span<const std::int16_t> labels, std::span<const std::uint8_t> anomaly,
                    int classes, double tpr_target) {
  check_dense(pred.size(), labels.size(), anomaly.size(), classes, "open_miou");
  if (scores.size() != labels.size()) throw InvalidArgument("open_miou: score map size mismatch");
  std::vector<double> s;
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool anom = masked(anomaly, i);
    if (!anom && !data::is_inlier_label(labels[i], classes)) continue;
    s.push_back(scores[i]);
    y.push_back(anom ? 1 : 0);
  }
  if (std::find(y.begin(), y.end(), 1) == y.end()) {
    throw InvalidArgument("open_miou: no anomaly pixels");
  }
  const double tau = open_threshold(s, y, tpr_target);
  return open_miou_at(pred, scores, labels, anomaly, classes, tau);
}

// ---------------------------------------------------------------------------

const char* bench_name(BenchKind k) {
  switch (k) {
    case BenchKind::kOH:
      return "OH";
    case BenchKind::kOP:
      return "OP";
    case BenchKind::kOPxMS:
      return "OPxMS";
    case BenchKind::kDH:
      return "DH";
    case BenchKind::kJSD:
      return "JSD";
  }
  return "?";
}

BenchKind parse_bench(const std::string& name) {
  std::string key;
  for (unsigned char ch : name) {
    if (std::isalnum(ch)) key.push_back(static_cast<char>(std::toupper(ch)));
  }
  if (key == "OH") return BenchKind::kOH;
  return bench_kind_for(score::parse_score(name));
}

BenchKind bench_kind_for(score::ScoreKind k) {
  switch (k) {
    case score::ScoreKind::kOP:
      return BenchKind::kOP;
    case score::ScoreKind::kOPxMS:
      return BenchKind::kOPxMS;
    case score::ScoreKind::kDH:
      return BenchKind::kDH;
    case score::ScoreKind::kJSD:
      return BenchKind::kJSD;
  }
  throw InvalidArgument("bench_kind_for: unknown score");
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

Eigen::Map<const Eigen::RowVectorXd> as_row(const Tensor& t) {
  return Eigen::Map<const Eigen::RowVectorXd>(t.data().data(), static_cast<Eigen::Index>(t.size()));
}

Tensor head(const RowMatrix& h, const ad::Var& w, const ad::Var& b) {
  const Tensor& wt = w.value();
  Tensor out({static_cast<std::size_t>(h.rows()), wt.cols()});
  Map(out.data().data(), h.rows(), static_cast<Eigen::Index>(wt.cols())).noalias() =
      (h * as_matrix(wt)).rowwise() + as_row(b.value());
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = logits.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

volatile double g_sink = 0.0;

void run_kind(const seg::SegNetParams& model, BenchKind kind, const data::Scene& scene,
              const Tensor& features, double temperature) {
  const bool with_ood = kind == BenchKind::kOP || kind == BenchKind::kOPxMS || kind == BenchKind::kDH;
  Inference inf = infer(model, features, with_ood);
  const std::vector<int> cls = argmax_rows(inf.class_logits);
  double sink = cls.empty() ? 0.0 : cls.front();
  if (kind != BenchKind::kOH) {
    seg::PixelPrediction pred;
    pred.height = scene.height;
    pred.width = scene.width;
    pred.class_logits = ad::constant(std::move(inf.class_logits));
    if (with_ood) pred.ood_logits = ad::constant(std::move(inf.ood_logits));
    score::ScoreMap m;
    switch (kind) {
      case BenchKind::kOP:
        m = score::score_op(pred, temperature);
        break;
      case BenchKind::kOPxMS:
        m = score::score_op_ms(pred, temperature);
        break;
      case BenchKind::kDH:
        m = score::score_dh(pred);
        break;
      case BenchKind::kJSD:
        m = score::score_jsd(pred, temperature);
        break;
      case BenchKind::kOH:
        break;
    }
    sink += m.values.front();
  }
  g_sink = g_sink + sink;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Inference infer(const seg::SegNetParams& model, const Tensor& features, bool with_ood) {
  if (features.rank() != 2 || features.cols() != static_cast<std::size_t>(model.config.feature_dim)) {
    throw InvalidArgument("infer: expected (pixels x " + std::to_string(model.config.feature_dim) +
                          ") features, got " + features.shape_str());
  }
  RowMatrix h = as_matrix(features);
  for (std::size_t l = 0; l < model.trunk_weights.size(); ++l) {
    RowMatrix z = (h * as_matrix(model.trunk_weights[l].value())).rowwise() +
                  as_row(model.trunk_biases[l].value());
    if (model.config.activation == seg::Activation::kTanh) {
      tanh_inplace({z.data(), static_cast<std::size_t>(z.size())});
      h = std::move(z);
    } else {
      h = z.cwiseMax(0.0);
    }
  }
  Inference out;
  out.class_logits = head(h, model.class_weight, model.class_bias);
  if (with_ood) out.ood_logits = head(h, model.ood_weight, model.ood_bias);
  return out;
}

seg::PixelPrediction infer_prediction(const seg::SegNetParams& model, const data::Scene& scene) {
  Inference inf = infer(model, scene.feature_matrix(), true);
  seg::PixelPrediction pred;
  pred.height = scene.height;
  pred.width = scene.width;
  pred.class_logits = ad::constant(std::move(inf.class_logits));
  pred.ood_logits = ad::constant(std::move(inf.ood_logits));
  return pred;
}

std::vector<BenchResult> bench_throughput(const seg::SegNetParams& model,
                                          std::span<const BenchKind> kinds,
                                          std::span<const data::Scene> scenes,
                                          const BenchOptions& options) {
  if (scenes.empty()) throw InvalidArgument("bench_throughput: empty scene list");
  if (kinds.empty()) throw InvalidArgument("bench_throughput: no kinds requested");
  if (options.repeats < 5) throw InvalidArgument("bench_throughput: repeats must be >= 5");
  if (options.warmup < 0) throw InvalidArgument("bench_throughput: warmup must be >= 0");
  std::vector<Tensor> features;
  for (const data::Scene& s : scenes) features.push_back(s.feature_matrix());

  using Clock = std::chrono::steady_clock;
  std::vector<BenchResult> results(kinds.size());
  for (std::size_t k = 0; k < kinds.size(); ++k) results[k].kind = kinds[k];
  for (int w = 0; w < options.warmup; ++w) {
    for (BenchKind kind : kinds) run_kind(model, kind, scenes[0], features[0], options.temperature);
  }
  // Slot t (one scene under every kind) belongs to repeat t % repeats, so
  // every repeat samples the whole run and slow drift in machine speed is
  // shared rather than split between repeats.
  const auto repeats = static_cast<std::size_t>(options.repeats);
  std::vector<std::vector<double>> spent(repeats, std::vector<double>(kinds.size(), 0.0));
  std::vector<std::vector<std::size_t>> done(repeats, std::vector<std::size_t>(kinds.size(), 0));
  auto enough = [&] {
    for (const auto& row : spent) {
      if (*std::min_element(row.begin(), row.end()) < options.min_repeat_seconds) return false;
    }
    return true;
  };
  std::size_t slot = 0;
  for (std::size_t pass = 0; pass == 0 || !enough(); ++pass) {
    for (std::size_t i = 0; i < scenes.size(); ++i, ++slot) {
      const std::size_t r = slot % repeats;
      for (std::size_t j = 0; j < kinds.size(); ++j) {
        const std::size_t k = (j + slot) % kinds.size();
        const auto start = Clock::now();
        run_kind(model, kinds[k], scenes[i], features[i], options.temperature);
        spent[r][k] += std::chrono::duration<double>(Clock::now() - start).count();
        ++done[r][k];
      }
    }
  }
  for (std::size_t r = 0; r < repeats; ++r) {
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      results[k].samples.push_back(static_cast<double>(done[r][k]) / spent[r][k]);
    }
  }
  for (BenchResult& r : results) {
    r.median_scenes_per_sec = median(r.samples);
    const double mean = std::accumulate(r.samples.begin(), r.samples.end(), 0.0) / r.samples.size();
    double var = 0.0;
    for (double s : r.samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(r.samples.size() - 1);
    r.cv = std::sqrt(var) / mean;
  }
  return results;
}

BenchResult bench_throughput(const seg::SegNetParams& model, BenchKind kind,
                             std::span<const data::Scene> scenes, const BenchOptions& options) {
  const BenchKind kinds[] = {kind};
  return bench_throughput(model, kinds, scenes, options).front();
}

// ---------------------------------------------------------------------------

const MetricRow* EvalReport::find(const std::string& method, const std::string& score) const {
  for (const MetricRow& r : rows) {
    if (r.method == method && r.score == score) return &r;
  }
  return nullptr;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + fmt(v[i]);
  return out;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "fingerprint = " << fingerprint << '\n';
  for (const MetricRow& r : rows) {
    os << '\n';
    os << "method = " << r.method << '\n';
    os << "score = " << r.score << '\n';
    os << "ap = " << fmt(r.ap) << '\n';
    os << "fpr95 = " << fmt(r.fpr95) << '\n';
    os << "auroc = " << fmt(r.auroc) << '\n';
    os << "closed_miou = " << fmt(r.closed_miou) << '\n';
    os << "open_miou = " << fmt(r.open_miou) << '\n';
    os << "scenes_per_sec = " << fmt(r.scenes_per_sec) << '\n';
    os << "closed_iou_per_class = " << fmt_list(r.closed_per_class) << '\n';
    os << "open_iou_per_class = " << fmt_list(r.open_per_class) << '\n';
  }
  return os.str();
}

std::string EvalReport::to_csv(bool header) const {
  std::ostringstream os;
  if (header) os << kCsvHeader << '\n';
  for (const MetricRow& r : rows) {
    os << r.method << ',' << r.score << ',' << fmt(r.ap) << ',' << fmt(r.fpr95) << ','
       << fmt(r.auroc) << ',' << fmt(r.closed_miou) << ',' << fmt(r.open_miou) << ','
       << fmt(r.scenes_per_sec) << '\n';
  }
  return os.str();
}

EvalReport evaluate_model(const seg::SegNetParams& model, std::span<const data::Scene> scenes,
                          const std::string& method, const EvalOptions& options) {
  if (scenes.empty()) throw InvalidArgument("evaluate: empty test set");
  if (options.kinds.empty()) throw InvalidArgument("evaluate: no score kinds requested");
  const int classes = model.config.classes;

  std::vector<int> pred;
  std::vector<std::int16_t> labels;
  std::vector<std::uint8_t> anomaly;
  std::vector<std::vector<double>> maps(options.kinds.size());
  for (const data::Scene& s : scenes) {
    if (s.classes != classes || s.feature_dim != model.config.feature_dim) {
      throw InvalidArgument("evaluate: scene does not match the model's classes or feature size");
    }
    const seg::PixelPrediction p = infer_prediction(model, s);
    const auto cls = seg::predicted_classes(p);
    pred.insert(pred.end(), cls.begin(), cls.end());
    labels.insert(labels.end(), s.labels.begin(), s.labels.end());
    if (s.anomaly.size() == s.pixels()) {
      anomaly.insert(anomaly.end(), s.anomaly.begin(), s.anomaly.end());
    } else {
      anomaly.insert(anomaly.end(), s.pixels(), 0);
    }
    for (std::size_t k = 0; k < options.kinds.size(); ++k) {
      const auto m = score::compute_score(p, options.kinds[k], options.temperature);
      maps[k].insert(maps[k].end(), m.values.begin(), m.values.end());
    }
  }

  const IoUResult closed = closed_miou(pred, labels, anomaly, classes);

  // Pooled detection set: anomaly pixels vs inlier pixels.
  std::vector<std::size_t> eval_idx;
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (anomaly[i]) {
      eval_idx.push_back(i);
      y.push_back(1);
    } else if (data::is_inlier_label(labels[i], classes)) {
      eval_idx.push_back(i);
      y.push_back(0);
    }
  }
  const bool has_anomaly = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_inlier = std::find(y.begin(), y.end(), 0) != y.end();
  if (!has_anomaly) spdlog::warn("evaluate: no anomaly pixels; anomaly metrics skipped");

  std::vector<BenchResult> bench;
  if (options.bench) {
    std::vector<BenchKind> kinds;
    for (score::ScoreKind k : options.kinds) kinds.push_back(bench_kind_for(k));
    BenchOptions b = *options.bench;
    b.temperature = options.temperature;
    bench = bench_throughput(model, kinds, scenes, b);
  }

  EvalReport report;
  for (std::size_t k = 0; k < options.kinds.size(); ++k) {
    MetricRow row;
    row.method = method;
    row.score = score::score_name(options.kinds[k]);
    row.closed_miou = closed.miou;
    row.closed_per_class = closed.per_class;
    row.scenes_per_sec = bench.empty() ? kNaN : bench[k].median_scenes_per_sec;
    row.has_anomaly_metrics = has_anomaly && has_inlier;
    if (row.has_anomaly_metrics) {
      std::vector<double> s(eval_idx.size());
      for (std::size_t i = 0; i < eval_idx.size(); ++i) s[i] = maps[k][eval_idx[i]];
      row.ap = average_precision(s, y);
      row.auroc = auroc(s, y);
      row.fpr95 = fpr_at_tpr(s, y, options.open_tpr);
      const IoUResult open = open_miou(pred, maps[k], labels, anomaly, classes, options.open_tpr);
      row.open_miou = open.miou;
      row.open_per_class = open.per_class;
    } else {
      row.ap = row.auroc = row.fpr95 = row.open_miou = kNaN;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace synthneg::eval
