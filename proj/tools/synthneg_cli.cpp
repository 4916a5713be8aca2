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


// Command-line front end over the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "synthneg/synthneg.h"

namespace {

struct Common {
  std::string config;
  std::string variant;
  long long seed = -1;
  std::string out;
  std::string score;
  int epochs_1 = -1;
  int epochs_2 = -1;
  bool quiet = false;
};

int report_error(sn_status s) {
  std::cerr << "error [" << sn_status_name(s) << "]: " << sn_last_error() << '\n';
  return static_cast<int>(s);
}

// Owns a config handle built from the common flags.
class Config {
 public:
  ~Config() { sn_config_free(handle_); }
  sn_status build(const Common& c) {
    sn_status s = c.config.empty() ? sn_config_create(&handle_) : sn_config_load(c.config.c_str(), &handle_);
    if (s != SN_OK) return s;
    if (!c.variant.empty() && (s = sn_config_set(handle_, "variant", c.variant.c_str())) != SN_OK) return s;
    if (c.seed >= 0 && (s = sn_config_set(handle_, "seed", std::to_string(c.seed).c_str())) != SN_OK) return s;
    if (!c.score.empty() && (s = sn_config_set(handle_, "score.kinds", c.score.c_str())) != SN_OK) return s;
    if (c.epochs_1 >= 0 &&
        (s = sn_config_set(handle_, "train.epochs_1", std::to_string(c.epochs_1).c_str())) != SN_OK) {
      return s;
    }
    if (c.epochs_2 >= 0 &&
        (s = sn_config_set(handle_, "train.epochs_2", std::to_string(c.epochs_2).c_str())) != SN_OK) {
      return s;
    }
    return sn_config_validate(handle_);
  }
  sn_config* get() const { return handle_; }

 private:
  sn_config* handle_ = nullptr;
};

class Report {
 public:
  ~Report() { sn_report_free(handle_); }
  sn_report** out() { return &handle_; }
  sn_report* get() const { return handle_; }

 private:
  sn_report* handle_ = nullptr;
};

void add_common(CLI::App* app, Common& c, bool epochs) {
  app->add_option("--config", c.config, "Configuration file (key = value)")->check(CLI::ExistingFile);
  app->add_option("--variant", c.variant, "Training variant, e.g. NF_HYBRID_LDLX");
  app->add_option("--seed", c.seed, "Random seed")->check(CLI::NonNegativeNumber);
  app->add_option("--score", c.score, "Comma-separated score kinds: OP,OPxMS,DH,JSD");
  if (epochs) {
    app->add_option("--epochs-1", c.epochs_1, "Phase-1 epochs")->check(CLI::NonNegativeNumber);
    app->add_option("--epochs-2", c.epochs_2, "Phase-2 epochs")->check(CLI::NonNegativeNumber);
  }
  app->add_flag("--quiet", c.quiet, "Only print errors and results");
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
  return static_cast<bool>(os);
}

void print_progress(const char* line, void*) { std::cerr << line << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense anomaly detection with flow-generated synthetic negatives"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sn_version());

  Common train_c, eval_c, bench_c, grid_c, gen_c;
  std::string cache_dir, checkpoint, data_dir, flow_ckpt, sample_out;
  int repeats = 0;
  int seeds = 1;
  bool with_bench = false;
  bool single = false;
  std::size_t count = 1000;
  long long sample_seed = 0;
  bool sample_quiet = false;

  auto* train = app.add_subcommand("train", "Two-phase training followed by evaluation");
  add_common(train, train_c, true);
  train->add_option("--out", train_c.out, "Output directory for checkpoints and records");
  train->add_option("--cache", cache_dir, "Cache directory for phase-1 and flow pretraining");

  auto* eval = app.add_subcommand("eval", "Evaluate a classifier checkpoint");
  add_common(eval, eval_c, false);
  eval->add_option("--checkpoint", checkpoint, "Classifier checkpoint (.snsg)")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_dir, "Directory with test_*.snsc scenes")->check(CLI::ExistingDirectory);
  eval->add_option("--out", eval_c.out, "Write the metrics table here");
  eval->add_flag("--bench", with_bench, "Also measure throughput");

  auto* bench = app.add_subcommand("bench", "Inference throughput per score kind");
  add_common(bench, bench_c, false);
  bench->add_option("--checkpoint", checkpoint, "Classifier checkpoint; default is a fresh model")
      ->check(CLI::ExistingFile);
  bench->add_option("--repeats", repeats, "Timed repeats (>= 5)")->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_c.out, "Write the table here");

  auto* grid = app.add_subcommand("grid", "Resumable experiment grid over all variants");
  add_common(grid, grid_c, true);
  grid->add_option("--out", grid_c.out, "Grid directory")->required();
  grid->add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  grid->add_option("--cache", cache_dir, "Cache directory for phase-1 and flow pretraining");
  grid->add_flag("--single", single, "Only the configured variant");

  auto* gen = app.add_subcommand("gen-data", "Write the toy train and test scenes");
  add_common(gen, gen_c, false);
  gen->add_option("--out", gen_c.out, "Output directory")->required();

  auto* sample = app.add_subcommand("sample-flow", "Dump flow samples, one pixel per line");
  sample->add_option("--checkpoint", flow_ckpt, "Flow checkpoint (.snfl)")->required()->check(CLI::ExistingFile);
  sample->add_option("--count", count, "Number of samples")->check(CLI::PositiveNumber);
  sample->add_option("--seed", sample_seed, "Random seed")->check(CLI::NonNegativeNumber);
  sample->add_option("--out", sample_out, "Output file; default stdout");
  sample->add_flag("--quiet", sample_quiet, "Only print errors");

  CLI11_PARSE(app, argc, argv);

  auto emit = [](const std::string& out, const std::string& text) {
    if (out.empty()) {
      std::cout << text;
      return 0;
    }
    if (!write_file(out, text)) {
      std::cerr << "error [io]: cannot write '" << out << "'\n";
      return static_cast<int>(SN_ERR_IO);
    }
    return 0;
  };

  if (train->parsed()) {
    sn_set_verbosity(train_c.quiet ? 0 : 1);
    Config cfg;
    if (sn_status s = cfg.build(train_c); s != SN_OK) return report_error(s);
    Report rep;
    const sn_status s = sn_train(cfg.get(), train_c.out.empty() ? nullptr : train_c.out.c_str(),
                                 cache_dir.empty() ? nullptr : cache_dir.c_str(),
                                 train_c.quiet ? nullptr : print_progress, nullptr, rep.out());
    if (s != SN_OK) return report_error(s);
    if (!train_c.quiet) std::cout << sn_report_text(rep.get()) << '\n';
    std::cout << sn_report_csv(rep.get());
    return 0;
  }
  if (eval->parsed()) {
    sn_set_verbosity(eval_c.quiet ? 0 : 1);
    Config cfg;
    if (sn_status s = cfg.build(eval_c); s != SN_OK) return report_error(s);
    Report rep;
    const sn_status s = sn_evaluate(cfg.get(), checkpoint.c_str(),
                                    data_dir.empty() ? nullptr : data_dir.c_str(), with_bench ? 1 : 0,
                                    rep.out());
    if (s != SN_OK) return report_error(s);
    if (!eval_c.quiet) std::cerr << sn_report_text(rep.get()) << '\n';
    return emit(eval_c.out, sn_report_csv(rep.get()));
  }
  if (bench->parsed()) {
    sn_set_verbosity(bench_c.quiet ? 0 : 1);
    Config cfg;
    if (sn_status s = cfg.build(bench_c); s != SN_OK) return report_error(s);
    Report rep;
    const sn_status s =
        sn_bench(cfg.get(), checkpoint.empty() ? nullptr : checkpoint.c_str(), repeats, rep.out());
    if (s != SN_OK) return report_error(s);
    return emit(bench_c.out, sn_report_csv(rep.get()));
  }
  if (grid->parsed()) {
    sn_set_verbosity(grid_c.quiet ? 0 : 1);
    Config cfg;
    if (sn_status s = cfg.build(grid_c); s != SN_OK) return report_error(s);
    Report rep;
    const sn_status s = sn_grid_run(cfg.get(), single ? 0 : 1, seeds, grid_c.out.c_str(),
                                    cache_dir.empty() ? nullptr : cache_dir.c_str(), rep.out());
    if (s != SN_OK) return report_error(s);
    std::cout << sn_report_text(rep.get());
    if (!grid_c.quiet) {
      std::cout << "training steps taken: " << sn_report_train_steps(rep.get()) << '\n';
    }
    if (!write_file(grid_c.out + "/results.csv", sn_report_csv(rep.get()))) {
      std::cerr << "error [io]: cannot write results table\n";
      return static_cast<int>(SN_ERR_IO);
    }
    return 0;
  }
  if (gen->parsed()) {
    sn_set_verbosity(gen_c.quiet ? 0 : 1);
    Config cfg;
    if (sn_status s = cfg.build(gen_c); s != SN_OK) return report_error(s);
    std::size_t n = 0;
    if (sn_status s = sn_gen_data(cfg.get(), gen_c.out.c_str(), &n); s != SN_OK) return report_error(s);
    if (!gen_c.quiet) std::cout << "wrote " << n << " scenes to " << gen_c.out << '\n';
    return 0;
  }
  if (sample->parsed()) {
    sn_set_verbosity(sample_quiet ? 0 : 1);
    Report rep;
    const sn_status s = sn_sample_flow(flow_ckpt.c_str(), static_cast<std::uint64_t>(sample_seed),
                                       count, rep.out());
    if (s != SN_OK) return report_error(s);
    return emit(sample_out, sn_report_text(rep.get()));
  }
  return 0;
}
