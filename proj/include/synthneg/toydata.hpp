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

// Synthetic dense-prediction scenes: an H x W grid of D-dimensional pixel
// features drawn from class-conditional Gaussians, plus the data pipeline
// pieces used around it (augmentation, negative pasting, inlier crops and
// test-time anomaly injection).

#ifndef SYNTHNEG_TOYDATA_HPP_
#define SYNTHNEG_TOYDATA_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "synthneg/random.hpp"
#include "synthneg/tensor.hpp"

namespace synthneg::data {

// Label values outside 0..K-1.
inline constexpr std::int16_t kIgnoreLabel = -1;
inline constexpr std::int16_t kNegativeLabel = -2;

inline bool is_inlier_label(std::int16_t label, int classes) {
  return label >= 0 && label < classes;
}

// Axis-aligned Gaussian.
struct Gaussian {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t dim() const { return mean.size(); }
  void validate(const char* what) const;
  void sample(Rng& rng, std::span<double> out) const;
  double max_stddev() const;
};

enum class Layout { kStripes, kVoronoi };

struct SceneSpec {
  int height = 64;
  int width = 64;
  int feature_dim = 8;
  int classes = 4;
  Layout layout = Layout::kVoronoi;
  int voronoi_sites = 8;  // site i gets class i % classes
  std::vector<Gaussian> class_dists;

  void validate() const;
};

// Geometry knobs of the default benchmark.
struct BenchmarkGeometry {
  double class_radius = 5.0;   // class means on a circle in dims (0, 1)
  double class_sigma = 1.0;
  double center_offset = 5.0;  // norm of the shared offset along (1, ..., 1)
  double auxiliary_distance = 7.0;
  double auxiliary_sigma = 1.0;
  double anomaly_sigma = 1.0;
};

enum class NegativeSourceKind { kAuxiliary, kFlow };

// Default toy benchmark: K inlier classes around a common centre, test
// anomalies at the centre, and an auxiliary negative cluster off the class
// plane. Anomaly and auxiliary distributions are disjoint from each other and
// from every class.
struct Benchmark {
  SceneSpec scene;
  Gaussian auxiliary;
  Gaussian anomaly;

  // Smallest pairwise distance between any two of {class means, auxiliary
  // mean, anomaly mean}, in units of the largest stddev involved.
  double min_separation_sigmas() const;
};

Benchmark make_benchmark(int height, int width, int feature_dim, int classes, Layout layout,
                         const BenchmarkGeometry& geometry = {});

struct Scene {
  int height = 0;
  int width = 0;
  int feature_dim = 0;
  int classes = 0;
  std::vector<double> features;        // H*W*D, row-major (r, c, d)
  std::vector<std::int16_t> labels;    // H*W
  std::vector<std::uint8_t> anomaly;   // H*W, 0/1

  Scene() = default;
  Scene(int h, int w, int d, int k);

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * width + c; }
  std::span<double> feature(int r, int c) {
    return {features.data() + index(r, c) * feature_dim, static_cast<std::size_t>(feature_dim)};
  }
  std::span<const double> feature(int r, int c) const {
    return {features.data() + index(r, c) * feature_dim, static_cast<std::size_t>(feature_dim)};
  }
  std::int16_t label(int r, int c) const { return labels[index(r, c)]; }

  // (H*W) x D view of the features.
  Tensor feature_matrix() const;

  // Checks the label/mask invariants; throws InvalidArgument.
  void validate() const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

enum class FlipMode { kRandom, kNever, kAlways };

struct AugmentParams {
  double jitter_lo = 0.5;
  double jitter_hi = 2.0;
  int crop = 48;
  FlipMode flip = FlipMode::kRandom;
};

// Random rescale (nearest neighbour), optional horizontal flip, random square
// crop. The rescaled scene must cover the crop.
Scene augment(const Scene& scene, std::uint64_t seed, const AugmentParams& params);

// Nearest-neighbour resize to out_h x out_w.
Scene rescale(const Scene& scene, int out_h, int out_w);
Scene flip_horizontal(const Scene& scene);
Scene crop_window(const Scene& scene, int row, int col, int side);

// Overwrites the side x side window at (row, col) with `patch` (side*side x D
// or side x side x D) and labels it negative. side == 0 leaves the scene
// unchanged.
Scene paste_negative(const Scene& scene, const Tensor& patch, int row, int col);
void paste_negative_inplace(Scene& scene, std::span<const double> patch, int side, int row,
                            int col);

// Flat pixel indices of a square window, row-major.
std::vector<std::size_t> window_indices(const Scene& scene, int row, int col, int side);

int sample_patch_size(std::uint64_t seed, double min_frac, double max_frac, int crop);
int sample_patch_size(Rng& rng, double min_frac, double max_frac, int crop);

// Features (size*size x D) of a uniformly chosen square window whose pixels
// all carry inlier labels and no anomaly flag.
Tensor crop_inlier(const Scene& scene, std::uint64_t seed, int size);
Tensor crop_inlier(const Scene& scene, Rng& rng, int size);

// Square blob of anomaly features at a uniform location; sets the mask and
// labels the pixels ignore.
Scene inject_test_anomaly(const Scene& scene, std::uint64_t seed, const Gaussian& anomaly,
                          int size);
Scene inject_test_anomaly_at(const Scene& scene, std::uint64_t seed, const Gaussian& anomaly,
                             int size, int row, int col);

// Versioned flat-binary scene format:
//   "SNSC" u32 version=1, u32 H, u32 W, u32 D, u32 K,
//   H*W*D f64 features, H*W i16 labels, ceil(H*W/8) bytes mask (LSB first).
void write_scene(std::ostream& os, const Scene& scene);
Scene read_scene(std::istream& is);
void save_scene(const std::string& path, const Scene& scene);
Scene load_scene(const std::string& path);

// One pixel per line: "row col label anomaly f0 f1 ...".
void write_scene_text(std::ostream& os, const Scene& scene);

// 64-bit FNV-1a over the scene's binary encoding.
std::uint64_t scene_hash(const Scene& scene);

}  // namespace synthneg::data

#endif  // SYNTHNEG_TOYDATA_HPP_
