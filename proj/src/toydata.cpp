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

#include "synthneg/toydata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "synthneg/binary_io.hpp"
#include "synthneg/error.hpp"

namespace synthneg::data {

namespace {

constexpr char kSceneMagic[5] = "SNSC";
constexpr std::uint32_t kSceneVersion = 1;

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void check_window(const Scene& scene, int row, int col, int side, const char* op) {
  if (side < 0 || row < 0 || col < 0 || row + side > scene.height || col + side > scene.width) {
    throw InvalidArgument(std::string(op) + ": window at (" + std::to_string(row) + ", " +
                          std::to_string(col) + ") of side " + std::to_string(side) +
                          " does not fit a " + std::to_string(scene.height) + "x" +
                          std::to_string(scene.width) + " scene");
  }
}

}  // namespace

void Gaussian::validate(const char* what) const {
  if (mean.empty() || mean.size() != stddev.size()) {
    throw InvalidArgument(std::string(what) + ": mean and stddev must have equal, nonzero length");
  }
  for (double s : stddev) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw InvalidArgument(std::string(what) + ": stddev must be finite and >= 0");
    }
  }
  for (double m : mean) {
    if (!std::isfinite(m)) throw InvalidArgument(std::string(what) + ": non-finite mean");
  }
}

void Gaussian::sample(Rng& rng, std::span<double> out) const {
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean[i] + stddev[i] * unit(rng);
}

double Gaussian::max_stddev() const { return *std::max_element(stddev.begin(), stddev.end()); }

void SceneSpec::validate() const {
  if (classes < 2) throw InvalidArgument("SceneSpec: need at least 2 classes");
  if (feature_dim < 2) throw InvalidArgument("SceneSpec: feature dim must be >= 2");
  if (height < 1 || width < 1) throw InvalidArgument("SceneSpec: empty scene");
  if (layout == Layout::kVoronoi && voronoi_sites < classes) {
    throw InvalidArgument("SceneSpec: need at least one Voronoi site per class");
  }
  if (static_cast<int>(class_dists.size()) != classes) {
    throw InvalidArgument("SceneSpec: expected one distribution per class");
  }
  for (const Gaussian& g : class_dists) {
    g.validate("SceneSpec class distribution");
    if (static_cast<int>(g.dim()) != feature_dim) {
      throw InvalidArgument("SceneSpec: class distribution dimension differs from feature dim");
    }
  }
  for (int a = 0; a < classes; ++a) {
    for (int b = a + 1; b < classes; ++b) {
      if (class_dists[a].mean == class_dists[b].mean) {
        throw InvalidArgument("SceneSpec: class means must be pairwise distinct");
      }
    }
  }
}

double Benchmark::min_separation_sigmas() const {
  std::vector<const Gaussian*> all;
  for (const Gaussian& g : scene.class_dists) all.push_back(&g);
  all.push_back(&auxiliary);
  all.push_back(&anomaly);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      const double sigma = std::max(all[i]->max_stddev(), all[j]->max_stddev());
      const double d = distance(all[i]->mean, all[j]->mean);
      best = std::min(best, sigma > 0.0 ? d / sigma : std::numeric_limits<double>::infinity());
    }
  }
  return best;
}

Benchmark make_benchmark(int height, int width, int feature_dim, int classes, Layout layout,
                         const BenchmarkGeometry& geo) {
  if (feature_dim < 2 || classes < 2) {
    throw InvalidArgument("make_benchmark: need feature_dim >= 2 and classes >= 2");
  }
  const auto dim = static_cast<std::size_t>(feature_dim);
  std::vector<double> center(dim, geo.center_offset / std::sqrt(static_cast<double>(dim)));

  Benchmark b;
  b.scene.height = height;
  b.scene.width = width;
  b.scene.feature_dim = feature_dim;
  b.scene.classes = classes;
  b.scene.layout = layout;
  b.scene.voronoi_sites = 2 * classes;
  for (int c = 0; c < classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * c / classes;
    Gaussian g{center, std::vector<double>(dim, geo.class_sigma)};
    g.mean[0] += geo.class_radius * std::cos(angle);
    g.mean[1] += geo.class_radius * std::sin(angle);
    b.scene.class_dists.push_back(std::move(g));
  }
  b.anomaly = Gaussian{center, std::vector<double>(dim, geo.anomaly_sigma)};
  b.auxiliary = Gaussian{center, std::vector<double>(dim, geo.auxiliary_sigma)};
  if (dim >= 3) {
    b.auxiliary.mean[2] += geo.auxiliary_distance;
  } else {
    const double angle = std::numbers::pi / classes;
    b.auxiliary.mean[0] += geo.auxiliary_distance * std::cos(angle);
    b.auxiliary.mean[1] += geo.auxiliary_distance * std::sin(angle);
  }
  b.scene.validate();
  return b;
}

Scene::Scene(int h, int w, int d, int k)
    : height(h),
      width(w),
      feature_dim(d),
      classes(k),
      features(static_cast<std::size_t>(h) * w * d, 0.0),
      labels(static_cast<std::size_t>(h) * w, kIgnoreLabel),
      anomaly(static_cast<std::size_t>(h) * w, 0) {}

Tensor Scene::feature_matrix() const {
  return Tensor({pixels(), static_cast<std::size_t>(feature_dim)}, features);
}

void Scene::validate() const {
  const std::size_t n = pixels();
  if (features.size() != n * feature_dim || labels.size() != n || anomaly.size() != n) {
    throw InvalidArgument("Scene: buffer sizes inconsistent with " + std::to_string(height) + "x" +
                          std::to_string(width) + "x" + std::to_string(feature_dim));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::int16_t l = labels[i];
    if (!(is_inlier_label(l, classes) || l == kNegativeLabel || l == kIgnoreLabel)) {
      throw InvalidArgument("Scene: label " + std::to_string(l) + " out of range");
    }
    if (anomaly[i] > 1) throw InvalidArgument("Scene: anomaly mask must be 0/1");
    if (anomaly[i] && l != kIgnoreLabel) {
      throw InvalidArgument("Scene: anomalous pixel must carry the ignore label");
    }
  }
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Scene scene(spec.height, spec.width, spec.feature_dim, spec.classes);

  if (spec.layout == Layout::kStripes) {
    for (int r = 0; r < spec.height; ++r) {
      for (int c = 0; c < spec.width; ++c) {
        scene.labels[scene.index(r, c)] =
            static_cast<std::int16_t>(static_cast<long>(c) * spec.classes / spec.width);
      }
    }
  } else {
    std::uniform_real_distribution<double> ur(0.0, spec.height);
    std::uniform_real_distribution<double> uc(0.0, spec.width);
    std::vector<std::pair<double, double>> sites(spec.voronoi_sites);
    for (auto& s : sites) s = {ur(rng), uc(rng)};
    for (int r = 0; r < spec.height; ++r) {
      for (int c = 0; c < spec.width; ++c) {
        const double pr = r + 0.5;
        const double pc = c + 0.5;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sites.size(); ++i) {
          const double d = (sites[i].first - pr) * (sites[i].first - pr) +
                           (sites[i].second - pc) * (sites[i].second - pc);
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
        scene.labels[scene.index(r, c)] = static_cast<std::int16_t>(best % spec.classes);
      }
    }
  }

  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      spec.class_dists[scene.label(r, c)].sample(rng, scene.feature(r, c));
    }
  }
  return scene;
}

Scene rescale(const Scene& scene, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw InvalidArgument("rescale: empty output");
  Scene out(out_h, out_w, scene.feature_dim, scene.classes);
  for (int r = 0; r < out_h; ++r) {
    const int sr = std::min(scene.height - 1,
                            static_cast<int>((r + 0.5) * scene.height / out_h));
    for (int c = 0; c < out_w; ++c) {
      const int sc = std::min(scene.width - 1, static_cast<int>((c + 0.5) * scene.width / out_w));
      const auto src = scene.feature(sr, sc);
      std::copy(src.begin(), src.end(), out.feature(r, c).begin());
      out.labels[out.index(r, c)] = scene.labels[scene.index(sr, sc)];
      out.anomaly[out.index(r, c)] = scene.anomaly[scene.index(sr, sc)];
    }
  }
  return out;
}

Scene flip_horizontal(const Scene& scene) {
  Scene out = scene;
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      const int mc = scene.width - 1 - c;
      const auto src = scene.feature(r, mc);
      std::copy(src.begin(), src.end(), out.feature(r, c).begin());
      out.labels[out.index(r, c)] = scene.labels[scene.index(r, mc)];
      out.anomaly[out.index(r, c)] = scene.anomaly[scene.index(r, mc)];
    }
  }
  return out;
}

Scene crop_window(const Scene& scene, int row, int col, int side) {
  check_window(scene, row, col, side, "crop_window");
  if (side == 0) throw InvalidArgument("crop_window: degenerate crop");
  Scene out(side, side, scene.feature_dim, scene.classes);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const auto src = scene.feature(row + r, col + c);
      std::copy(src.begin(), src.end(), out.feature(r, c).begin());
      out.labels[out.index(r, c)] = scene.label(row + r, col + c);
      out.anomaly[out.index(r, c)] = scene.anomaly[scene.index(row + r, col + c)];
    }
  }
  return out;
}

Scene augment(const Scene& scene, std::uint64_t seed, const AugmentParams& params) {
  if (params.crop < 1) throw InvalidArgument("augment: degenerate crop size");
  if (!(params.jitter_lo > 0.0) || params.jitter_hi < params.jitter_lo) {
    throw InvalidArgument("augment: jitter range must satisfy 0 < lo <= hi");
  }
  Rng rng(seed);
  const double s = params.jitter_lo == params.jitter_hi
                       ? params.jitter_lo
                       : std::uniform_real_distribution<double>(params.jitter_lo,
                                                                params.jitter_hi)(rng);
  const int h = std::max(1, static_cast<int>(std::lround(scene.height * s)));
  const int w = std::max(1, static_cast<int>(std::lround(scene.width * s)));
  if (params.crop > std::min(h, w)) {
    throw InvalidArgument("augment: crop " + std::to_string(params.crop) +
                          " exceeds rescaled scene " + std::to_string(h) + "x" +
                          std::to_string(w));
  }
  const bool coin = std::bernoulli_distribution(0.5)(rng);
  const bool flip = params.flip == FlipMode::kAlways || (params.flip == FlipMode::kRandom && coin);
  const int row = std::uniform_int_distribution<int>(0, h - params.crop)(rng);
  const int col = std::uniform_int_distribution<int>(0, w - params.crop)(rng);

  Scene scaled = (h == scene.height && w == scene.width) ? scene : rescale(scene, h, w);
  if (flip) scaled = flip_horizontal(scaled);
  return crop_window(scaled, row, col, params.crop);
}

std::vector<std::size_t> window_indices(const Scene& scene, int row, int col, int side) {
  check_window(scene, row, col, side, "window_indices");
  std::vector<std::size_t> idx;
  idx.reserve(static_cast<std::size_t>(side) * side);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) idx.push_back(scene.index(row + r, col + c));
  }
  return idx;
}

void paste_negative_inplace(Scene& scene, std::span<const double> patch, int side, int row,
                            int col) {
  check_window(scene, row, col, side, "paste_negative");
  const std::size_t d = scene.feature_dim;
  if (patch.size() != static_cast<std::size_t>(side) * side * d) {
    throw InvalidArgument("paste_negative: patch holds " + std::to_string(patch.size()) +
                          " values, window needs " +
                          std::to_string(static_cast<std::size_t>(side) * side * d));
  }
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * side + c;
      std::copy_n(patch.begin() + k * d, d, scene.feature(row + r, col + c).begin());
      scene.labels[scene.index(row + r, col + c)] = kNegativeLabel;
    }
  }
}

Scene paste_negative(const Scene& scene, const Tensor& patch, int row, int col) {
  if (patch.empty()) {
    check_window(scene, row, col, 0, "paste_negative");
    return scene;
  }
  const std::size_t d = scene.feature_dim;
  if (patch.cols() != d) {
    throw InvalidArgument("paste_negative: patch feature dim " + std::to_string(patch.cols()) +
                          " != scene feature dim " + std::to_string(d));
  }
  const std::size_t pixels = patch.rows();
  const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(pixels))));
  if (static_cast<std::size_t>(side) * side != pixels) {
    throw InvalidArgument("paste_negative: patch is not square, shape " + patch.shape_str());
  }
  Scene out = scene;
  paste_negative_inplace(out, patch.data(), side, row, col);
  return out;
}

int sample_patch_size(Rng& rng, double min_frac, double max_frac, int crop) {
  if (!(min_frac > 0.0) || !(min_frac <= max_frac) || !(max_frac < 1.0)) {
    throw InvalidArgument("sample_patch_size: need 0 < min_frac <= max_frac < 1");
  }
  if (crop < 1) throw InvalidArgument("sample_patch_size: crop must be >= 1");
  const int lo = std::max(1, static_cast<int>(std::lround(min_frac * crop)));
  const int hi = std::max(lo, static_cast<int>(std::lround(max_frac * crop)));
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

int sample_patch_size(std::uint64_t seed, double min_frac, double max_frac, int crop) {
  Rng rng(seed);
  return sample_patch_size(rng, min_frac, max_frac, crop);
}

Tensor crop_inlier(const Scene& scene, Rng& rng, int size) {
  if (size < 1 || size > scene.height || size > scene.width) {
    throw InvalidArgument("crop_inlier: window size " + std::to_string(size) +
                          " does not fit the scene");
  }
  // Summed-area table of invalid pixels; a window is valid iff its sum is 0.
  const int h = scene.height;
  const int w = scene.width;
  std::vector<int> sat(static_cast<std::size_t>(h + 1) * (w + 1), 0);
  auto at = [&](int r, int c) -> int& { return sat[static_cast<std::size_t>(r) * (w + 1) + c]; };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = scene.index(r, c);
      const int bad = (!is_inlier_label(scene.labels[i], scene.classes) || scene.anomaly[i]) ? 1 : 0;
      at(r + 1, c + 1) = bad + at(r, c + 1) + at(r + 1, c) - at(r, c);
    }
  }
  std::vector<std::pair<int, int>> valid;
  for (int r = 0; r + size <= h; ++r) {
    for (int c = 0; c + size <= w; ++c) {
      const int bad = at(r + size, c + size) - at(r, c + size) - at(r + size, c) + at(r, c);
      if (bad == 0) valid.emplace_back(r, c);
    }
  }
  if (valid.empty()) {
    throw InvalidArgument("crop_inlier: no all-inlier window of size " + std::to_string(size));
  }
  const auto pick = std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng);
  const auto [row, col] = valid[pick];
  const std::size_t d = scene.feature_dim;
  Tensor out({static_cast<std::size_t>(size) * size, d});
  std::size_t k = 0;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c, ++k) {
      const auto src = scene.feature(row + r, col + c);
      std::copy(src.begin(), src.end(), out.row(k).begin());
    }
  }
  return out;
}

Tensor crop_inlier(const Scene& scene, std::uint64_t seed, int size) {
  Rng rng(seed);
  return crop_inlier(scene, rng, size);
}

Scene inject_test_anomaly_at(const Scene& scene, std::uint64_t seed, const Gaussian& anomaly,
                             int size, int row, int col) {
  check_window(scene, row, col, size, "inject_test_anomaly");
  if (size == 0) return scene;
  anomaly.validate("inject_test_anomaly");
  if (static_cast<int>(anomaly.dim()) != scene.feature_dim) {
    throw InvalidArgument("inject_test_anomaly: anomaly dimension differs from scene");
  }
  Rng rng(seed);
  Scene out = scene;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      anomaly.sample(rng, out.feature(row + r, col + c));
      out.labels[out.index(row + r, col + c)] = kIgnoreLabel;
      out.anomaly[out.index(row + r, col + c)] = 1;
    }
  }
  return out;
}

Scene inject_test_anomaly(const Scene& scene, std::uint64_t seed, const Gaussian& anomaly,
                          int size) {
  if (size == 0) return scene;
  if (size < 0 || size > scene.height || size > scene.width) {
    throw InvalidArgument("inject_test_anomaly: anomaly of size " + std::to_string(size) +
                          " does not fit the scene");
  }
  Rng rng(derive_seed(seed, {0}));
  const int row = std::uniform_int_distribution<int>(0, scene.height - size)(rng);
  const int col = std::uniform_int_distribution<int>(0, scene.width - size)(rng);
  return inject_test_anomaly_at(scene, derive_seed(seed, {1}), anomaly, size, row, col);
}

void write_scene(std::ostream& os, const Scene& scene) {
  scene.validate();
  io::write_magic(os, kSceneMagic);
  io::write_le<std::uint32_t>(os, kSceneVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(scene.height));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(scene.width));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(scene.feature_dim));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(scene.classes));
  for (double v : scene.features) io::write_le<double>(os, v);
  for (std::int16_t l : scene.labels) io::write_le<std::int16_t>(os, l);
  std::vector<std::uint8_t> bits((scene.pixels() + 7) / 8, 0);
  for (std::size_t i = 0; i < scene.pixels(); ++i) {
    if (scene.anomaly[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  os.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
}

Scene read_scene(std::istream& is) {
  io::expect_magic(is, kSceneMagic, "scene");
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kSceneVersion) {
    throw FormatError("scene: unsupported version " + std::to_string(version));
  }
  const auto h = io::read_le<std::uint32_t>(is);
  const auto w = io::read_le<std::uint32_t>(is);
  const auto d = io::read_le<std::uint32_t>(is);
  const auto k = io::read_le<std::uint32_t>(is);
  constexpr std::uint32_t kLimit = 1u << 15;
  if (h == 0 || w == 0 || d == 0 || k == 0 || h > kLimit || w > kLimit || d > kLimit ||
      k > kLimit) {
    throw FormatError("scene: implausible header");
  }
  Scene scene(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d), static_cast<int>(k));
  for (double& v : scene.features) v = io::read_le<double>(is);
  for (std::int16_t& l : scene.labels) l = io::read_le<std::int16_t>(is);
  std::vector<std::uint8_t> bits((scene.pixels() + 7) / 8, 0);
  if (!is.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()))) {
    throw FormatError("scene: truncated mask");
  }
  for (std::size_t i = 0; i < scene.pixels(); ++i) scene.anomaly[i] = (bits[i / 8] >> (i % 8)) & 1u;
  try {
    scene.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("scene: ") + e.what());
  }
  return scene;
}

void save_scene(const std::string& path, const Scene& scene) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_scene(os, scene);
  if (!os) throw IoError("write to '" + path + "' failed");
}

Scene load_scene(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_scene(is);
}

void write_scene_text(std::ostream& os, const Scene& scene) {
  os << "# row col label anomaly features[" << scene.feature_dim << "]\n";
  os.precision(17);
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      os << r << ' ' << c << ' ' << scene.label(r, c) << ' '
         << static_cast<int>(scene.anomaly[scene.index(r, c)]);
      for (double v : scene.feature(r, c)) os << ' ' << v;
      os << '\n';
    }
  }
}

std::uint64_t scene_hash(const Scene& scene) {
  std::ostringstream os(std::ios::binary);
  write_scene(os, scene);
  const std::string bytes = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace synthneg::data
