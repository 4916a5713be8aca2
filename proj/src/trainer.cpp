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


#include "synthneg/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "synthneg/error.hpp"
#include "synthneg/losses.hpp"
#include "synthneg/optim.hpp"
#include "synthneg/random.hpp"

namespace synthneg::train {

namespace fs = std::filesystem;

namespace {

// Independent random streams, one per purpose.
enum Stream : std::uint64_t {
  kTrainScene = 1,
  kTestScene,
  kTestAnomaly,
  kSegInit,
  kFlowInit,
  kPhase1Order,
  kPhase1Augment,
  kFlowPretrain,
  kPhase2Order,
  kPhase2Augment,
  kPhase2Paste,
  kEnergyProbe,
};

seg::SegNetConfig seg_config(const ExperimentConfig& cfg) {
  seg::SegNetConfig s = cfg.seg;
  s.feature_dim = cfg.feature_dim;
  s.classes = cfg.classes;
  return s;
}

flow::FlowConfig flow_config(const ExperimentConfig& cfg) {
  flow::FlowConfig f = cfg.flow;
  f.dim = cfg.feature_dim;
  return f;
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void require_finite(const ad::Var& v, const char* term, const std::string& where) {
  if (v.defined() && !std::isfinite(v.item())) {
    throw NumericError(where + ": non-finite " + term + " (" + std::to_string(v.item()) + ")");
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw IoError("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t batches_per_epoch(const ExperimentConfig& cfg) {
  return (static_cast<std::size_t>(cfg.train_scenes) + cfg.batch - 1) / cfg.batch;
}

// One pasted negative: window placement plus values.
struct Paste {
  int side = 0;
  int row = 0;
  int col = 0;
};

Paste place_patch(const ExperimentConfig& cfg, Rng& rng, int crop) {
  Paste p;
  p.side = data::sample_patch_size(rng, cfg.paste_min_frac, cfg.paste_max_frac, crop);
  p.row = std::uniform_int_distribution<int>(0, crop - p.side)(rng);
  p.col = std::uniform_int_distribution<int>(0, crop - p.side)(rng);
  return p;
}

Tensor auxiliary_patch(const data::Gaussian& g, Rng& rng, int side) {
  Tensor t({static_cast<std::size_t>(side) * side, g.dim()});
  for (std::size_t r = 0; r < t.rows(); ++r) g.sample(rng, t.row(r));
  return t;
}

struct Phase1 {
  seg::SegNetParams seg;
  std::vector<double> cls;  // per-epoch mean
  std::uint64_t steps = 0;
};

Phase1 run_phase1(const ExperimentConfig& cfg, const std::vector<data::Scene>& train,
                  const TrainOptions& options) {
  Phase1 p;
  p.seg = seg::init_segnet(seg_config(cfg), derive_seed(cfg.seed, {kSegInit}));
  optim::Optimizer opt(optim::Kind::kAdam, cfg.seg_lr_max, p.seg.all());
  const std::size_t nb = batches_per_epoch(cfg);
  for (int epoch = 0; epoch < cfg.epochs_1; ++epoch) {
    const auto order = shuffled(train.size(), derive_seed(cfg.seed, {kPhase1Order, std::uint64_t(epoch)}));
    double sum = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      std::vector<data::Scene> batch;
      for (std::size_t j = b * cfg.batch; j < std::min(order.size(), (b + 1) * cfg.batch); ++j) {
        batch.push_back(data::augment(train[order[j]],
                                      derive_seed(cfg.seed, {kPhase1Augment, std::uint64_t(epoch), j}),
                                      cfg.augment));
      }
      const ad::Var loss = loss::classification_objective(p.seg, batch);
      require_finite(loss, "L_cls", "phase 1, epoch " + std::to_string(epoch + 1));
      opt.zero_grad();
      ad::backward(loss);
      opt.step();
      ++p.steps;
      sum += loss.item();
    }
    p.cls.push_back(sum / static_cast<double>(nb));
    if (options.progress) {
      options.progress("phase 1 epoch " + std::to_string(epoch + 1) + "/" +
                       std::to_string(cfg.epochs_1) + " L_cls=" + fmt(p.cls.back()));
    }
  }
  return p;
}

struct Pretrained {
  flow::FlowParams flow;
  std::uint64_t steps = 0;
};

Pretrained run_flow_pretrain(const ExperimentConfig& cfg, const std::vector<data::Scene>& train) {
  Pretrained p;
  p.flow = flow::init_flow(flow_config(cfg), derive_seed(cfg.seed, {kFlowInit}));
  optim::Optimizer opt(optim::Kind::kAdamax, cfg.flow_pretrain_lr, p.flow.all());
  for (int step = 0; step < cfg.flow_pretrain_steps; ++step) {
    Rng rng(derive_seed(cfg.seed, {kFlowPretrain, std::uint64_t(step)}));
    std::vector<ad::Var> crops;
    for (int j = 0; j < cfg.batch; ++j) {
      const auto idx = std::uniform_int_distribution<std::size_t>(0, train.size() - 1)(rng);
      crops.push_back(ad::constant(data::crop_inlier(train[idx], rng, cfg.flow_crop)));
    }
    const ad::Var loss = loss::loss_mle(p.flow, ad::concat_rows(crops));
    require_finite(loss, "L_mle", "flow pretraining, step " + std::to_string(step + 1));
    opt.zero_grad();
    ad::backward(loss);
    opt.step();
    ++p.steps;
  }
  return p;
}

std::string cache_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

}  // namespace

Dataset make_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  const data::Benchmark bench = cfg.benchmark();
  Dataset d;
  for (int i = 0; i < cfg.train_scenes; ++i) {
    d.train.push_back(data::generate_scene(bench.scene, derive_seed(cfg.seed, {kTrainScene, std::uint64_t(i)})));
  }
  for (int i = 0; i < cfg.test_scenes; ++i) {
    const data::Scene s =
        data::generate_scene(bench.scene, derive_seed(cfg.seed, {kTestScene, std::uint64_t(i)}));
    d.test.push_back(data::inject_test_anomaly(s, derive_seed(cfg.seed, {kTestAnomaly, std::uint64_t(i)}),
                                               bench.anomaly, cfg.anomaly_size));
  }
  return d;
}

std::string RunRecord::to_text() const {
  std::ostringstream os;
  os << "fingerprint = " << fingerprint << '\n';
  os << "variant = " << variant << '\n';
  os << "seed = " << seed << '\n';
  os << "epochs = " << losses.size() << '\n';
  os << "train_steps = " << train_steps << '\n';
  os << "inlier_log_density = " << fmt(inlier_log_density) << '\n';
  os << "negative_log_density = " << fmt(negative_log_density) << '\n';
  for (std::size_t e = 0; e < losses.size(); ++e) {
    const EpochLosses& l = losses[e];
    os << "epoch." << (e + 1) << " = cls " << fmt(l.cls) << " d " << fmt(l.d) << " x " << fmt(l.x)
       << " mle " << fmt(l.mle) << " jsd " << fmt(l.jsd) << '\n';
  }
  for (const std::string& c : checkpoints) os << "checkpoint = " << c << '\n';
  os << "wall_seconds = " << fmt(wall_seconds) << '\n';
  os << "\n[report]\n" << report.to_text();
  return os.str();
}

TrainResult train(const ExperimentConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const Dataset ds = make_dataset(cfg);
  const data::Benchmark bench = cfg.benchmark();
  const loss::VariantConfig& variant = cfg.variant;
  const bool use_flow = variant.uses_flow();

  TrainResult result;
  RunRecord& rec = result.record;
  rec.fingerprint = cfg.fingerprint();
  rec.variant = loss::variant_name(variant.name);
  rec.seed = cfg.seed;
  if (!options.out_dir.empty()) ensure_dir(options.out_dir);
  if (!options.cache_dir.empty()) ensure_dir(options.cache_dir);
  auto checkpoint = [&](const std::string& name) {
    return (fs::path(options.out_dir) / name).string();
  };

  // Phase 1, possibly from the cache.
  Phase1 p1;
  const std::string p1_seg = options.cache_dir.empty()
                                 ? ""
                                 : cache_path(options.cache_dir, "phase1-" + cfg.phase1_fingerprint() + ".snsg");
  const std::string p1_log = p1_seg.empty() ? "" : p1_seg.substr(0, p1_seg.size() - 5) + ".txt";
  if (!p1_seg.empty() && fs::exists(p1_seg) && fs::exists(p1_log)) {
    p1.seg = seg::load_segnet(p1_seg);
    std::istringstream is(read_text(p1_log));
    std::string tok;
    while (is >> tok) p1.cls.push_back(std::strtod(tok.c_str(), nullptr));
    if (p1.cls.size() != static_cast<std::size_t>(cfg.epochs_1)) {
      throw FormatError("phase-1 cache '" + p1_log + "' has the wrong epoch count");
    }
  } else {
    p1 = run_phase1(cfg, ds.train, options);
    if (!p1_seg.empty()) {
      std::ostringstream os;
      for (double v : p1.cls) os << fmt(v) << '\n';
      write_text(p1_log, os.str());
      seg::save_segnet(p1_seg, p1.seg);
    }
  }
  rec.train_steps += p1.steps;
  for (double c : p1.cls) rec.losses.push_back({c, 0.0, 0.0, 0.0, 0.0});
  seg::SegNetParams segp = std::move(p1.seg);
  if (!options.out_dir.empty()) {
    rec.checkpoints.push_back(checkpoint("phase1.snsg"));
    seg::save_segnet(rec.checkpoints.back(), segp);
  }

  // Flow pretraining, possibly from the cache.
  std::optional<flow::FlowParams> flowp;
  if (use_flow) {
    const std::string fp = options.cache_dir.empty()
                               ? ""
                               : cache_path(options.cache_dir,
                                            "flow-" + cfg.flow_pretrain_fingerprint() + ".snfl");
    if (!fp.empty() && fs::exists(fp)) {
      flowp = flow::load_flow(fp);
    } else {
      Pretrained pre = run_flow_pretrain(cfg, ds.train);
      rec.train_steps += pre.steps;
      flowp = std::move(pre.flow);
      if (!fp.empty()) flow::save_flow(fp, *flowp);
    }
    if (!options.out_dir.empty()) {
      rec.checkpoints.push_back(checkpoint("flow_pretrained.snfl"));
      flow::save_flow(rec.checkpoints.back(), *flowp);
    }
  }

  // Phase 2.
  optim::Optimizer seg_opt(optim::Kind::kAdam, cfg.seg_lr_max, segp.all());
  std::optional<optim::Optimizer> flow_opt;
  if (use_flow) flow_opt.emplace(optim::Kind::kAdamax, cfg.flow_lr, flowp->all());
  const std::size_t nb = batches_per_epoch(cfg);
  const std::int64_t total_steps = static_cast<std::int64_t>(nb) * cfg.epochs_2;
  const auto warmup_steps =
      static_cast<std::int64_t>(std::floor(cfg.flow_warmup_frac * static_cast<double>(total_steps)));
  const int crop = cfg.augment.crop;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs_2; ++epoch) {
    const auto order = shuffled(ds.train.size(), derive_seed(cfg.seed, {kPhase2Order, std::uint64_t(epoch)}));
    EpochLosses acc;
    for (std::size_t b = 0; b < nb; ++b, ++step) {
      const std::string where = "phase 2, epoch " + std::to_string(epoch + 1) + ", step " +
                                std::to_string(step + 1);
      const bool mle_only = step < warmup_steps;
      seg_opt.set_lr(optim::cosine_lr(step, total_steps, cfg.seg_lr_max, cfg.seg_lr_min));

      std::vector<loss::MixedScene> batch;
      for (std::size_t j = b * cfg.batch; j < std::min(order.size(), (b + 1) * cfg.batch); ++j) {
        const std::uint64_t e = static_cast<std::uint64_t>(epoch);
        data::Scene base = data::augment(ds.train[order[j]],
                                         derive_seed(cfg.seed, {kPhase2Augment, e, j}), cfg.augment);
        Rng rng(derive_seed(cfg.seed, {kPhase2Paste, e, j}));
        const Paste p = place_patch(cfg, rng, crop);
        loss::MixedScene m;
        m.window = data::window_indices(base, p.row, p.col, p.side);
        Tensor values;
        if (use_flow) {
          m.flow_patch = flow::sample_patch(*flowp, rng, p.side);
          m.inlier_crop = data::crop_inlier(base, rng, cfg.flow_crop);
          values = m.flow_patch.value();
        } else {
          values = auxiliary_patch(bench.auxiliary, rng, p.side);
        }
        m.scene = data::paste_negative(base, values, p.row, p.col);
        batch.push_back(std::move(m));
      }

      const loss::Objective o =
          loss::joint_objective(segp, use_flow ? &*flowp : nullptr, batch, cfg.weights, variant, mle_only);
      require_finite(o.cls, "L_cls", where);
      require_finite(o.d_in, "L_d_in", where);
      require_finite(o.d_out, "L_d_out", where);
      require_finite(o.x, "L_x", where);
      require_finite(o.seg_jsd, "L_jsd (classifier)", where);
      require_finite(o.mle, "L_mle", where);
      require_finite(o.flow_jsd, "L_jsd (flow)", where);
      require_finite(o.total, "total loss", where);

      seg_opt.zero_grad();
      if (flow_opt) flow_opt->zero_grad();
      ad::backward(o.total);
      seg_opt.step();
      if (flow_opt) flow_opt->step();
      ++rec.train_steps;

      acc.cls += o.cls.item();
      acc.d += o.d_in.item() + o.d_out.item();
      acc.x += o.x.item();
      if (o.mle.defined()) acc.mle += o.mle.item();
      if (o.flow_jsd.defined()) {
        acc.jsd += o.flow_jsd.item();
      } else if (variant.use_jsd_in_seg_loss) {
        acc.jsd += o.seg_jsd.item();
      }
    }
    const double n = static_cast<double>(nb);
    rec.losses.push_back({acc.cls / n, acc.d / n, acc.x / n, acc.mle / n, acc.jsd / n});
    if (options.progress) {
      const EpochLosses& l = rec.losses.back();
      options.progress("phase 2 epoch " + std::to_string(epoch + 1) + "/" +
                       std::to_string(cfg.epochs_2) + " L_cls=" + fmt(l.cls) + " L_d=" + fmt(l.d) +
                       " L_x=" + fmt(l.x) + " L_mle=" + fmt(l.mle) + " L_jsd=" + fmt(l.jsd));
    }
  }

  if (!options.out_dir.empty()) {
    rec.checkpoints.push_back(checkpoint("final.snsg"));
    seg::save_segnet(rec.checkpoints.back(), segp);
    if (flowp) {
      rec.checkpoints.push_back(checkpoint("final.snfl"));
      flow::save_flow(rec.checkpoints.back(), *flowp);
    }
  }

  result.model.seg = std::move(segp);
  result.model.flow = std::move(flowp);
  const auto gap = energy_gap(result.model, cfg, ds.test);
  rec.inlier_log_density = gap.first;
  rec.negative_log_density = gap.second;
  if (options.evaluate) rec.report = evaluate(result.model.seg, ds.test, cfg, options.bench);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (!options.out_dir.empty()) {
    write_text(checkpoint("record.txt"), rec.to_text());
    write_text(checkpoint("metrics.csv"), rec.report.to_csv());
  }
  return result;
}

eval::EvalReport evaluate(const seg::SegNetParams& model, std::span<const data::Scene> test,
                          const ExperimentConfig& cfg,
                          const std::optional<eval::BenchOptions>& bench) {
  eval::EvalOptions opt;
  opt.kinds = cfg.score_kinds();
  opt.temperature = cfg.temperature;
  opt.open_tpr = cfg.open_tpr;
  opt.bench = bench;
  eval::EvalReport r = eval::evaluate_model(model, test, loss::variant_name(cfg.variant.name), opt);
  r.fingerprint = cfg.fingerprint();
  return r;
}

eval::EvalReport evaluate_checkpoint(const std::string& seg_checkpoint,
                                     std::span<const data::Scene> test, const ExperimentConfig& cfg,
                                     const std::optional<eval::BenchOptions>& bench) {
  return evaluate(seg::load_segnet(seg_checkpoint), test, cfg, bench);
}

std::pair<double, double> energy_gap(const TrainedModel& model, const ExperimentConfig& cfg,
                                     std::span<const data::Scene> test) {
  const int classes = model.seg.config.classes;
  double in_sum = 0.0;
  std::size_t in_n = 0;
  for (const data::Scene& s : test) {
    const Tensor ld = seg::log_density(eval::infer_prediction(model.seg, s));
    for (std::size_t i = 0; i < s.pixels(); ++i) {
      if (!s.anomaly[i] && data::is_inlier_label(s.labels[i], classes)) {
        in_sum += ld[i];
        ++in_n;
      }
    }
  }
  const data::Benchmark bench = cfg.benchmark();
  double neg_sum = 0.0;
  std::size_t neg_n = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    Rng rng(derive_seed(cfg.seed, {kEnergyProbe, i}));
    const Paste p = place_patch(cfg, rng, cfg.augment.crop);
    Tensor values = model.flow && cfg.variant.uses_flow()
                        ? flow::sample_patch(model.flow->frozen(), rng, p.side).value()
                        : auxiliary_patch(bench.auxiliary, rng, p.side);
    const eval::Inference inf = eval::infer(model.seg, values, false);
    const Tensor lse = logsumexp_rows(inf.class_logits);
    for (double v : lse.data()) neg_sum += v;
    neg_n += lse.size();
  }
  if (in_n == 0 || neg_n == 0) throw InvalidArgument("energy_gap: empty pixel population");
  return {in_sum / static_cast<double>(in_n), neg_sum / static_cast<double>(neg_n)};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<eval::MetricRow> parse_metrics_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<eval::MetricRow> rows;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      if (line != eval::kCsvHeader) throw FormatError("metrics table: unexpected header");
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw FormatError("metrics table: expected 8 columns");
    eval::MetricRow r;
    r.method = f[0];
    r.score = f[1];
    double* dst[] = {&r.ap, &r.fpr95, &r.auroc, &r.closed_miou, &r.open_miou, &r.scenes_per_sec};
    for (int k = 0; k < 6; ++k) *dst[k] = std::strtod(f[2 + k].c_str(), nullptr);
    r.has_anomaly_metrics = !std::isnan(r.ap);
    rows.push_back(std::move(r));
  }
  return rows;
}

const char* aux_column(const std::string& variant) {
  const loss::VariantConfig v = loss::VariantConfig::make(loss::parse_variant(variant));
  return v.uses_flow() ? "synthetic" : "real";
}

}  // namespace

GridResult run_grid(std::span<const ExperimentConfig> configs, const std::string& out_dir,
                    const TrainOptions& options) {
  if (configs.empty()) throw InvalidArgument("run_grid: no configs");
  ensure_dir(out_dir);
  GridResult g;
  for (const ExperimentConfig& cfg : configs) {
    GridRow row;
    row.variant = loss::variant_name(cfg.variant.name);
    row.seed = cfg.seed;
    try {
      row.fingerprint = cfg.fingerprint();
      const std::string dir = (fs::path(out_dir) / row.fingerprint).string();
      const std::string done = (fs::path(dir) / "DONE").string();
      if (fs::exists(done)) {
        row.rows = parse_metrics_csv(read_text((fs::path(dir) / "metrics.csv").string()));
        row.resumed = true;
      } else {
        TrainOptions o = options;
        o.out_dir = dir;
        o.evaluate = true;
        write_text((fs::path(dir).string() + ".cfg"), cfg.to_string());
        const TrainResult r = train(cfg, o);
        g.train_steps += r.record.train_steps;
        row.rows = r.record.report.rows;
        write_text(done, row.fingerprint + "\n");
      }
    } catch (const Error& e) {
      row.error = e.what();
      spdlog::error("grid: {} seed {} failed: {}", row.variant, row.seed, row.error);
    }
    g.runs.push_back(std::move(row));
  }
  return g;
}

std::string GridResult::to_table() const {
  std::ostringstream os;
  auto pct = [](double v) {
    if (std::isnan(v)) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v;
    return s.str();
  };
  os << std::left << std::setw(16) << "Method" << std::setw(11) << "Aux. data" << std::setw(7)
     << "Score" << std::right << std::setw(8) << "AP" << std::setw(8) << "FPR95" << std::setw(8)
     << "AUROC" << std::setw(11) << "closed IoU" << std::setw(10) << "open IoU" << std::setw(11)
     << "scenes/s" << '\n';
  for (const GridRow& run : runs) {
    if (!run.error.empty()) {
      os << std::left << std::setw(16) << run.variant << "FAILED: " << run.error << '\n';
      continue;
    }
    for (const eval::MetricRow& r : run.rows) {
      std::ostringstream sps;
      if (std::isnan(r.scenes_per_sec)) {
        sps << "-";
      } else {
        sps << std::fixed << std::setprecision(1) << r.scenes_per_sec;
      }
      os << std::left << std::setw(16) << r.method << std::setw(11) << aux_column(r.method)
         << std::setw(7) << r.score << std::right << std::setw(8) << pct(r.ap) << std::setw(8)
         << pct(r.fpr95) << std::setw(8) << pct(r.auroc) << std::setw(11) << pct(r.closed_miou)
         << std::setw(10) << pct(r.open_miou) << std::setw(11) << sps.str() << '\n';
    }
  }
  return os.str();
}

std::string GridResult::to_csv() const {
  eval::EvalReport all;
  for (const GridRow& run : runs) all.rows.insert(all.rows.end(), run.rows.begin(), run.rows.end());
  return all.to_csv();
}

std::vector<ExperimentConfig> default_grid(const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out;
  for (loss::Variant v : loss::all_variants()) {
    ExperimentConfig c = base;
    c.set_variant(v);
    c.scores.clear();
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> write_dataset(const ExperimentConfig& cfg, const std::string& dir) {
  ensure_dir(dir);
  const Dataset ds = make_dataset(cfg);
  std::vector<std::string> paths;
  auto emit = [&](const std::vector<data::Scene>& scenes, const char* prefix) {
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      std::ostringstream name;
      name << prefix << '_' << std::setw(3) << std::setfill('0') << i << ".snsc";
      paths.push_back((fs::path(dir) / name.str()).string());
      data::save_scene(paths.back(), scenes[i]);
    }
  };
  emit(ds.train, "train");
  emit(ds.test, "test");
  return paths;
}

}  // namespace synthneg::train
