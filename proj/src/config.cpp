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


#include "synthneg/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "synthneg/error.hpp"

namespace synthneg::train {

namespace {

using Cfg = ExperimentConfig;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw InvalidArgument("config: '" + key + "' expects a real number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidArgument("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string num(long long v) { return std::to_string(v); }

struct Key {
  std::function<void(Cfg&, const std::string&, const std::string&)> set;
  std::function<std::string(const Cfg&)> get;
};

#define SN_REAL(field)                                                                        \
  Key {                                                                                       \
    [](Cfg& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); },    \
        [](const Cfg& c) { return num(c.field); }                                             \
  }
#define SN_INT(field)                                                                         \
  Key {                                                                                       \
    [](Cfg& c, const std::string& k, const std::string& v) { c.field = to_int<int>(k, v); },  \
        [](const Cfg& c) { return num(static_cast<long long>(c.field)); }                     \
  }

const char* layout_name(data::Layout l) { return l == data::Layout::kVoronoi ? "voronoi" : "stripes"; }

const char* flip_name(data::FlipMode f) {
  switch (f) {
    case data::FlipMode::kRandom:
      return "random";
    case data::FlipMode::kNever:
      return "never";
    case data::FlipMode::kAlways:
      return "always";
  }
  return "?";
}

const std::map<std::string, Key>& registry() {
  static const std::map<std::string, Key> keys = {
      {"variant",
       {[](Cfg& c, const std::string&, const std::string& v) { c.set_variant(loss::parse_variant(v)); },
        [](const Cfg& c) { return std::string(loss::variant_name(c.variant.name)); }}},
      {"seed",
       {[](Cfg& c, const std::string& k, const std::string& v) { c.seed = to_int<std::uint64_t>(k, v); },
        [](const Cfg& c) { return std::to_string(c.seed); }}},
      {"scene.height", SN_INT(scene_height)},
      {"scene.width", SN_INT(scene_width)},
      {"scene.feature_dim", SN_INT(feature_dim)},
      {"scene.classes", SN_INT(classes)},
      {"scene.layout",
       {[](Cfg& c, const std::string& k, const std::string& v) {
          const std::string l = lower(v);
          if (l == "voronoi") {
            c.layout = data::Layout::kVoronoi;
          } else if (l == "stripes") {
            c.layout = data::Layout::kStripes;
          } else {
            throw InvalidArgument("config: '" + k + "' must be voronoi or stripes");
          }
        },
        [](const Cfg& c) { return std::string(layout_name(c.layout)); }}},
      {"scene.class_radius", SN_REAL(geometry.class_radius)},
      {"scene.class_sigma", SN_REAL(geometry.class_sigma)},
      {"scene.center_offset", SN_REAL(geometry.center_offset)},
      {"scene.auxiliary_distance", SN_REAL(geometry.auxiliary_distance)},
      {"scene.auxiliary_sigma", SN_REAL(geometry.auxiliary_sigma)},
      {"scene.anomaly_sigma", SN_REAL(geometry.anomaly_sigma)},
      {"data.train_scenes", SN_INT(train_scenes)},
      {"data.test_scenes", SN_INT(test_scenes)},
      {"data.anomaly_size", SN_INT(anomaly_size)},
      {"aug.jitter_lo", SN_REAL(augment.jitter_lo)},
      {"aug.jitter_hi", SN_REAL(augment.jitter_hi)},
      {"aug.crop", SN_INT(augment.crop)},
      {"aug.flip",
       {[](Cfg& c, const std::string& k, const std::string& v) {
          const std::string f = lower(v);
          if (f == "random") {
            c.augment.flip = data::FlipMode::kRandom;
          } else if (f == "never") {
            c.augment.flip = data::FlipMode::kNever;
          } else if (f == "always") {
            c.augment.flip = data::FlipMode::kAlways;
          } else {
            throw InvalidArgument("config: '" + k + "' must be random, never or always");
          }
        },
        [](const Cfg& c) { return std::string(flip_name(c.augment.flip)); }}},
      {"paste.min_frac", SN_REAL(paste_min_frac)},
      {"paste.max_frac", SN_REAL(paste_max_frac)},
      {"loss.beta_x", SN_REAL(weights.beta_x)},
      {"loss.beta_d", SN_REAL(weights.beta_d)},
      {"loss.beta_jsd", SN_REAL(weights.beta_jsd)},
      {"loss.ood_head_beta", SN_REAL(weights.ood_head_beta)},
      {"score.temperature", SN_REAL(temperature)},
      {"score.kinds",
       {[](Cfg& c, const std::string&, const std::string& v) {
          if (lower(v) == "default") {
            c.scores.clear();
          } else {
            c.scores = score::parse_score_list(v);
          }
        },
        [](const Cfg& c) {
          if (c.scores.empty()) return std::string("default");
          std::string out;
          for (auto k : c.scores) out += (out.empty() ? "" : ",") + std::string(score::score_name(k));
          return out;
        }}},
      {"train.epochs_1", SN_INT(epochs_1)},
      {"train.epochs_2", SN_INT(epochs_2)},
      {"train.batch", SN_INT(batch)},
      {"seg.lr_max", SN_REAL(seg_lr_max)},
      {"seg.lr_min", SN_REAL(seg_lr_min)},
      {"seg.hidden", SN_INT(seg.hidden)},
      {"seg.layers", SN_INT(seg.layers)},
      {"seg.activation",
       {[](Cfg& c, const std::string&, const std::string& v) {
          c.seg.activation = seg::parse_activation(v);
        },
        [](const Cfg& c) { return std::string(seg::activation_name(c.seg.activation)); }}},
      {"flow.lr", SN_REAL(flow_lr)},
      {"flow.pretrain_steps", SN_INT(flow_pretrain_steps)},
      {"flow.pretrain_lr", SN_REAL(flow_pretrain_lr)},
      {"flow.warmup_frac", SN_REAL(flow_warmup_frac)},
      {"flow.crop", SN_INT(flow_crop)},
      {"flow.layers", SN_INT(flow.layers)},
      {"flow.hidden", SN_INT(flow.hidden)},
      {"flow.depth", SN_INT(flow.conditioner_depth)},
      {"flow.s_max", SN_REAL(flow.s_max)},
      {"eval.open_tpr", SN_REAL(open_tpr)},
  };
  return keys;
}

#undef SN_REAL
#undef SN_INT

std::string subset(const Cfg& c, std::initializer_list<const char*> prefixes,
                   std::initializer_list<const char*> extra) {
  std::string out;
  for (const auto& [key, k] : registry()) {
    bool take = std::find_if(extra.begin(), extra.end(), [&](const char* e) { return key == e; }) !=
                extra.end();
    for (const char* p : prefixes) take = take || key.rfind(p, 0) == 0;
    if (take) out += key + " = " + k.get(c) + "\n";
  }
  return out;
}

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::vector<score::ScoreKind> default_scores(loss::Variant v) {
  using score::ScoreKind;
  switch (v) {
    case loss::Variant::kDenseHybrid:
    case loss::Variant::kNFHybridLdLx:
      return {ScoreKind::kDH, ScoreKind::kOPxMS};
    case loss::Variant::kNFlowJS:
      return {ScoreKind::kJSD};
    case loss::Variant::kNFHybridJS:
    case loss::Variant::kNFHybridLd:
      return {ScoreKind::kDH};
    case loss::Variant::kOODHead:
    case loss::Variant::kNFOODHead:
      return {ScoreKind::kDH, ScoreKind::kOP, ScoreKind::kOPxMS};
  }
  return {ScoreKind::kDH};
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = registry();
  const auto it = keys.find(key);
  if (it == keys.end()) throw InvalidArgument("config: unknown key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

void ExperimentConfig::set_variant(loss::Variant v) { variant = loss::VariantConfig::make(v); }

void ExperimentConfig::validate() const {
  variant.validate();
  weights.validate();
  if (scene_height < 8 || scene_width < 8) throw InvalidArgument("config: scenes must be at least 8x8");
  if (feature_dim < 2 || classes < 2) throw InvalidArgument("config: need feature_dim >= 2 and classes >= 2");
  if (train_scenes < 1 || test_scenes < 1) throw InvalidArgument("config: need at least one train and test scene");
  if (anomaly_size < 1 || anomaly_size > std::min(scene_height, scene_width)) {
    throw InvalidArgument("config: anomaly_size must fit in a scene");
  }
  if (!(augment.jitter_lo > 0.0) || augment.jitter_hi < augment.jitter_lo) {
    throw InvalidArgument("config: need 0 < aug.jitter_lo <= aug.jitter_hi");
  }
  if (augment.crop < 2) throw InvalidArgument("config: aug.crop must be >= 2");
  const double smallest = augment.jitter_lo * std::min(scene_height, scene_width);
  if (std::lround(smallest) < augment.crop) {
    throw InvalidArgument("config: aug.crop " + std::to_string(augment.crop) +
                          " exceeds the smallest rescaled scene side (" + num(smallest) + ")");
  }
  if (!(paste_min_frac > 0.0) || paste_max_frac < paste_min_frac || paste_max_frac >= 1.0) {
    throw InvalidArgument("config: need 0 < paste.min_frac <= paste.max_frac < 1");
  }
  if (!(temperature > 0.0)) throw InvalidArgument("config: score.temperature must be > 0");
  if (epochs_1 < 0 || epochs_2 < 0) throw InvalidArgument("config: epochs must be >= 0");
  if (epochs_2 == 0 && variant.name != loss::Variant::kOODHead) {
    // Every variant is anomaly-aware; only the OODHead ablation tolerates an
    // empty phase 2 (it then reduces to a plain classifier).
    throw InvalidArgument("config: train.epochs_2 must be > 0 for " +
                          std::string(loss::variant_name(variant.name)));
  }
  if (batch < 1) throw InvalidArgument("config: train.batch must be >= 1");
  if (!(seg_lr_max > 0.0) || seg_lr_min < 0.0 || seg_lr_min > seg_lr_max) {
    throw InvalidArgument("config: need 0 <= seg.lr_min <= seg.lr_max, seg.lr_max > 0");
  }
  if (!(flow_lr > 0.0) || !(flow_pretrain_lr > 0.0)) throw InvalidArgument("config: flow learning rates must be > 0");
  if (flow_pretrain_steps < 0) throw InvalidArgument("config: flow.pretrain_steps must be >= 0");
  if (flow_warmup_frac < 0.0 || flow_warmup_frac > 1.0) {
    throw InvalidArgument("config: flow.warmup_frac must lie in [0, 1]");
  }
  if (flow_crop < 1 || flow_crop > augment.crop) throw InvalidArgument("config: flow.crop must fit in aug.crop");
  if (!(open_tpr > 0.0 && open_tpr <= 1.0)) throw InvalidArgument("config: eval.open_tpr must lie in (0, 1]");
  seg::SegNetConfig s = seg;
  s.feature_dim = feature_dim;
  s.classes = classes;
  s.validate();
  flow::FlowConfig f = flow;
  f.dim = feature_dim;
  f.validate();
}

std::vector<score::ScoreKind> ExperimentConfig::score_kinds() const {
  return scores.empty() ? default_scores(variant.name) : scores;
}

data::Benchmark ExperimentConfig::benchmark() const {
  return data::make_benchmark(scene_height, scene_width, feature_dim, classes, layout, geometry);
}

std::string ExperimentConfig::to_string() const {
  std::string out;
  for (const auto& [key, k] : registry()) out += key + " = " + k.get(*this) + "\n";
  return out;
}

std::string ExperimentConfig::fingerprint() const { return hex64(fnv1a(to_string())); }

std::string ExperimentConfig::phase1_fingerprint() const {
  return hex64(fnv1a("phase1\n" + subset(*this, {"scene.", "data.", "aug.", "seg."},
                                         {"seed", "train.epochs_1", "train.batch"})));
}

std::string ExperimentConfig::flow_pretrain_fingerprint() const {
  return hex64(fnv1a("flow\n" + subset(*this, {"scene.", "data.", "flow."}, {"seed"})));
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  // The variant resets variant-derived fields, so apply it first.
  struct Entry {
    std::string key;
    std::string value;
    int line;
  };
  std::vector<Entry> entries;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw InvalidArgument(origin + ":" + std::to_string(lineno) + ": empty key");
    entries.push_back({key, value, lineno});
  }
  std::stable_partition(entries.begin(), entries.end(),
                        [](const Entry& e) { return e.key == "variant"; });
  for (const Entry& e : entries) {
    try {
      cfg.set(e.key, e.value);
    } catch (const InvalidArgument& err) {
      throw InvalidArgument(origin + ":" + std::to_string(e.line) + ": " + err.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace synthneg::train
