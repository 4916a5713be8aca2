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


#include "synthneg/synthneg.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "synthneg/config.hpp"
#include "synthneg/error.hpp"
#include "synthneg/eval.hpp"
#include "synthneg/flow.hpp"
#include "synthneg/trainer.hpp"

struct sn_config {
  synthneg::train::ExperimentConfig cfg;
  std::string text;
};

struct sn_report {
  struct Row {
    std::string method;
    std::string score;
    std::map<std::string, double> metrics;
  };
  std::string text;
  std::string csv;
  std::vector<Row> rows;
  std::uint64_t train_steps = 0;
};

namespace {

namespace fs = std::filesystem;
using namespace synthneg;

thread_local std::string g_last_error;

sn_status fail(sn_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
sn_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return SN_OK;
  } catch (const InvalidArgument& e) {
    return fail(SN_ERR_INVALID_ARGUMENT, e.what());
  } catch (const IoError& e) {
    return fail(SN_ERR_IO, e.what());
  } catch (const FormatError& e) {
    return fail(SN_ERR_FORMAT, e.what());
  } catch (const NumericError& e) {
    return fail(SN_ERR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SN_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

sn_report::Row metric_row(const eval::MetricRow& r) {
  sn_report::Row row;
  row.method = r.method;
  row.score = r.score;
  row.metrics = {{"ap", r.ap},
                 {"fpr95", r.fpr95},
                 {"auroc", r.auroc},
                 {"closed_miou", r.closed_miou},
                 {"open_miou", r.open_miou},
                 {"scenes_per_sec", r.scenes_per_sec}};
  return row;
}

std::vector<data::Scene> load_test_dir(const std::string& dir) {
  std::vector<std::string> paths;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("test_", 0) == 0 && entry.path().extension() == ".snsc") {
      paths.push_back(entry.path().string());
    }
  }
  if (ec) throw IoError("cannot read directory '" + dir + "': " + ec.message());
  if (paths.empty()) throw IoError("no test_*.snsc scenes in '" + dir + "'");
  std::sort(paths.begin(), paths.end());
  std::vector<data::Scene> scenes;
  for (const auto& p : paths) scenes.push_back(data::load_scene(p));
  return scenes;
}

eval::BenchOptions bench_options(int repeats) {
  eval::BenchOptions b;
  if (repeats > 0) b.repeats = repeats;
  return b;
}

}  // namespace

extern "C" {

const char* sn_version(void) { return "1.0.0"; }

const char* sn_status_name(sn_status status) {
  switch (status) {
    case SN_OK:
      return "ok";
    case SN_ERR_INVALID_ARGUMENT:
      return "invalid-argument";
    case SN_ERR_IO:
      return "io";
    case SN_ERR_FORMAT:
      return "format";
    case SN_ERR_NUMERIC:
      return "numeric";
    case SN_ERR_INTERNAL:
      return "internal";
  }
  return "unknown";
}

const char* sn_last_error(void) { return g_last_error.c_str(); }

void sn_set_verbosity(int level) {
  spdlog::set_level(level <= 0 ? spdlog::level::err
                               : level == 1 ? spdlog::level::info : spdlog::level::debug);
}

sn_status sn_config_create(sn_config** out) {
  return guarded([&] {
    require(out != nullptr, "sn_config_create: null output");
    *out = new sn_config{};
  });
}

sn_status sn_config_load(const char* path, sn_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "sn_config_load: null argument");
    auto* c = new sn_config{};
    try {
      c->cfg = train::load_config(path);
    } catch (...) {
      delete c;
      throw;
    }
    *out = c;
  });
}

sn_status sn_config_parse(const char* text, sn_config** out) {
  return guarded([&] {
    require(text != nullptr && out != nullptr, "sn_config_parse: null argument");
    auto* c = new sn_config{};
    try {
      c->cfg = train::parse_config(text);
    } catch (...) {
      delete c;
      throw;
    }
    *out = c;
  });
}

sn_status sn_config_set(sn_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config && key && value, "sn_config_set: null argument");
    config->cfg.set(key, value);
  });
}

sn_status sn_config_validate(const sn_config* config) {
  return guarded([&] {
    require(config != nullptr, "sn_config_validate: null config");
    config->cfg.validate();
  });
}

sn_status sn_config_text(sn_config* config, const char** out) {
  return guarded([&] {
    require(config && out, "sn_config_text: null argument");
    config->text = config->cfg.to_string();
    *out = config->text.c_str();
  });
}

sn_status sn_config_fingerprint(const sn_config* config, char out[17]) {
  return guarded([&] {
    require(config && out, "sn_config_fingerprint: null argument");
    const std::string fp = config->cfg.fingerprint();
    std::memcpy(out, fp.c_str(), 17);
  });
}

void sn_config_free(sn_config* config) { delete config; }

sn_status sn_train(const sn_config* config, const char* out_dir, const char* cache_dir,
                   sn_progress_fn progress, void* user, sn_report** out) {
  return guarded([&] {
    require(config && out, "sn_train: null argument");
    train::TrainOptions opt;
    if (out_dir) opt.out_dir = out_dir;
    if (cache_dir) opt.cache_dir = cache_dir;
    if (progress) opt.progress = [progress, user](const std::string& line) { progress(line.c_str(), user); };
    const train::TrainResult r = train::train(config->cfg, opt);
    auto rep = std::make_unique<sn_report>();
    rep->text = r.record.to_text();
    rep->csv = r.record.report.to_csv();
    rep->train_steps = r.record.train_steps;
    for (const auto& m : r.record.report.rows) {
      sn_report::Row row = metric_row(m);
      row.metrics["inlier_log_density"] = r.record.inlier_log_density;
      row.metrics["negative_log_density"] = r.record.negative_log_density;
      rep->rows.push_back(std::move(row));
    }
    *out = rep.release();
  });
}

sn_status sn_evaluate(const sn_config* config, const char* seg_checkpoint, const char* data_dir,
                      int bench, sn_report** out) {
  return guarded([&] {
    require(config && seg_checkpoint && out, "sn_evaluate: null argument");
    const std::vector<data::Scene> test =
        data_dir ? load_test_dir(data_dir) : train::make_dataset(config->cfg).test;
    std::optional<eval::BenchOptions> b;
    if (bench) b = bench_options(0);
    const eval::EvalReport r = train::evaluate_checkpoint(seg_checkpoint, test, config->cfg, b);
    auto rep = std::make_unique<sn_report>();
    rep->text = r.to_text();
    rep->csv = r.to_csv();
    for (const auto& m : r.rows) rep->rows.push_back(metric_row(m));
    *out = rep.release();
  });
}

sn_status sn_bench(const sn_config* config, const char* seg_checkpoint, int repeats,
                   sn_report** out) {
  return guarded([&] {
    require(config && out, "sn_bench: null argument");
    const train::ExperimentConfig& cfg = config->cfg;
    cfg.validate();
    seg::SegNetParams model;
    if (seg_checkpoint) {
      model = seg::load_segnet(seg_checkpoint);
    } else {
      seg::SegNetConfig sc = cfg.seg;
      sc.feature_dim = cfg.feature_dim;
      sc.classes = cfg.classes;
      model = seg::init_segnet(sc, cfg.seed);
    }
    const std::vector<data::Scene> scenes = train::make_dataset(cfg).test;
    std::vector<eval::BenchKind> kinds = {eval::BenchKind::kOH};
    for (score::ScoreKind k : cfg.score_kinds()) kinds.push_back(eval::bench_kind_for(k));
    eval::BenchOptions bo = bench_options(repeats);
    bo.temperature = cfg.temperature;
    const auto results = eval::bench_throughput(model, kinds, scenes, bo);
    auto rep = std::make_unique<sn_report>();
    std::ostringstream text;
    std::ostringstream csv;
    csv << "kind,median_scenes_per_sec,cv\n";
    text << std::setprecision(6);
    csv << std::setprecision(17);
    for (const auto& r : results) {
      text << "kind = " << eval::bench_name(r.kind) << "\nmedian_scenes_per_sec = "
           << r.median_scenes_per_sec << "\ncv = " << r.cv << "\n\n";
      csv << eval::bench_name(r.kind) << ',' << r.median_scenes_per_sec << ',' << r.cv << '\n';
      sn_report::Row row;
      row.method = "bench";
      row.score = eval::bench_name(r.kind);
      row.metrics = {{"scenes_per_sec", r.median_scenes_per_sec}, {"cv", r.cv}};
      rep->rows.push_back(std::move(row));
    }
    rep->text = text.str();
    rep->csv = csv.str();
    *out = rep.release();
  });
}

sn_status sn_grid_run(const sn_config* config, int all_variants, int seeds, const char* out_dir,
                      const char* cache_dir, sn_report** out) {
  return guarded([&] {
    require(config && out_dir && out, "sn_grid_run: null argument");
    require(seeds >= 1, "sn_grid_run: seeds must be >= 1");
    std::vector<train::ExperimentConfig> configs;
    for (int s = 0; s < seeds; ++s) {
      train::ExperimentConfig base = config->cfg;
      base.seed = config->cfg.seed + static_cast<std::uint64_t>(s);
      if (all_variants) {
        for (auto& c : train::default_grid(base)) configs.push_back(std::move(c));
      } else {
        configs.push_back(base);
      }
    }
    train::TrainOptions opt;
    if (cache_dir) opt.cache_dir = cache_dir;
    eval::BenchOptions b;
    b.repeats = 5;
    b.warmup = 1;
    b.min_repeat_seconds = 0.02;
    opt.bench = b;
    const train::GridResult g = train::run_grid(configs, out_dir, opt);
    auto rep = std::make_unique<sn_report>();
    rep->text = g.to_table();
    rep->csv = g.to_csv();
    rep->train_steps = g.train_steps;
    std::size_t failed = 0;
    for (const auto& run : g.runs) {
      if (!run.error.empty()) ++failed;
      for (const auto& m : run.rows) rep->rows.push_back(metric_row(m));
    }
    if (failed) {
      rep->text += std::to_string(failed) + " run(s) failed\n";
    }
    *out = rep.release();
  });
}

sn_status sn_gen_data(const sn_config* config, const char* out_dir, size_t* scene_count) {
  return guarded([&] {
    require(config && out_dir, "sn_gen_data: null argument");
    const auto paths = train::write_dataset(config->cfg, out_dir);
    if (scene_count) *scene_count = paths.size();
  });
}

sn_status sn_sample_flow(const char* flow_checkpoint, uint64_t seed, size_t count,
                         sn_report** out) {
  return guarded([&] {
    require(flow_checkpoint && out, "sn_sample_flow: null argument");
    require(count >= 1, "sn_sample_flow: count must be >= 1");
    const flow::FlowParams f = flow::load_flow(flow_checkpoint).frozen();
    Rng rng(seed);
    const Tensor s = flow::sample(f, rng, count).value();
    std::ostringstream os;
    os << std::setprecision(10);
    for (std::size_t r = 0; r < s.rows(); ++r) {
      const auto row = s.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) os << (c ? " " : "") << row[c];
      os << '\n';
    }
    auto rep = std::make_unique<sn_report>();
    rep->text = os.str();
    *out = rep.release();
  });
}

const char* sn_report_text(const sn_report* report) { return report ? report->text.c_str() : ""; }

const char* sn_report_csv(const sn_report* report) { return report ? report->csv.c_str() : ""; }

size_t sn_report_row_count(const sn_report* report) { return report ? report->rows.size() : 0; }

const char* sn_report_row_method(const sn_report* report, size_t row) {
  return (report && row < report->rows.size()) ? report->rows[row].method.c_str() : nullptr;
}

const char* sn_report_row_score(const sn_report* report, size_t row) {
  return (report && row < report->rows.size()) ? report->rows[row].score.c_str() : nullptr;
}

sn_status sn_report_metric(const sn_report* report, size_t row, const char* name, double* out) {
  return guarded([&] {
    require(report && name && out, "sn_report_metric: null argument");
    require(row < report->rows.size(), "sn_report_metric: row out of range");
    const auto& m = report->rows[row].metrics;
    const auto it = m.find(name);
    if (it == m.end()) throw InvalidArgument(std::string("sn_report_metric: no metric '") + name + "'");
    *out = it->second;
  });
}

uint64_t sn_report_train_steps(const sn_report* report) { return report ? report->train_steps : 0; }

void sn_report_free(sn_report* report) { delete report; }

}  // extern "C"
