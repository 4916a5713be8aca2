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


#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "synthneg/error.hpp"
#include "synthneg/toydata.hpp"

using namespace synthneg;
using namespace synthneg::data;

namespace {

Benchmark default_bench() { return make_benchmark(64, 64, 8, 4, Layout::kVoronoi); }

Scene small_scene(std::uint64_t seed, int h = 9, int w = 7) {
  Benchmark b = make_benchmark(h, w, 3, 3, Layout::kStripes);
  return generate_scene(b.scene, seed);
}

Tensor constant_patch(int side, int dim, double value) {
  return Tensor({static_cast<std::size_t>(side) * side, static_cast<std::size_t>(dim)}, value);
}

// Pixels whose features, label or mask differ between the two scenes.
std::set<std::size_t> changed(const Scene& a, const Scene& b) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    bool diff = a.labels[i] != b.labels[i] || a.anomaly[i] != b.anomaly[i];
    for (int d = 0; d < a.feature_dim; ++d) {
      diff = diff || a.features[i * a.feature_dim + d] != b.features[i * b.feature_dim + d];
    }
    if (diff) out.insert(i);
  }
  return out;
}

}  // namespace

TEST_CASE("default benchmark keeps every distribution at least 4 sigma apart") {
  const Benchmark b = default_bench();
  CHECK(b.min_separation_sigmas() >= 4.0);
  // Independent pairwise check on the means.
  std::vector<const Gaussian*> all;
  for (const Gaussian& g : b.scene.class_dists) all.push_back(&g);
  all.push_back(&b.auxiliary);
  all.push_back(&b.anomaly);
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < all[i]->dim(); ++k) {
        const double d = all[i]->mean[k] - all[j]->mean[k];
        d2 += d * d;
      }
      const double sigma = std::max(all[i]->max_stddev(), all[j]->max_stddev());
      CHECK(std::sqrt(d2) >= 4.0 * sigma);
    }
  }
  CHECK(b.auxiliary.mean != b.anomaly.mean);
}

TEST_CASE("generate_scene is deterministic and seed-sensitive") {
  const Benchmark b = default_bench();
  const Scene s1 = generate_scene(b.scene, 7);
  const Scene s2 = generate_scene(b.scene, 7);
  const Scene s3 = generate_scene(b.scene, 8);
  CHECK(s1 == s2);
  CHECK(scene_hash(s1) == scene_hash(s2));
  CHECK(scene_hash(s1) != scene_hash(s3));
  s1.validate();
  for (std::int16_t l : s1.labels) CHECK(is_inlier_label(l, 4));
}

TEST_CASE("zero-variance classes reproduce their means exactly") {
  Benchmark b = default_bench();
  for (Gaussian& g : b.scene.class_dists) g.stddev.assign(g.dim(), 0.0);
  const Scene s = generate_scene(b.scene, 3);
  for (int r = 0; r < s.height; ++r) {
    for (int c = 0; c < s.width; ++c) {
      const auto f = s.feature(r, c);
      const auto& mean = b.scene.class_dists[s.label(r, c)].mean;
      CHECK(std::equal(f.begin(), f.end(), mean.begin()));
    }
  }
}

TEST_CASE("per-class empirical means lie within 3 sigma / sqrt(n)") {
  // Each comparison exceeds 3 sigma with probability 0.0027, so over 20 scenes
  // x 32 components about 1.7 exceedances are expected. P(more than 8) < 1e-4.
  const Benchmark b = default_bench();
  int exceed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = generate_scene(b.scene, 1000 + seed);
    for (int k = 0; k < 4; ++k) {
      std::vector<double> sum(8, 0.0);
      std::size_t n = 0;
      for (std::size_t i = 0; i < s.pixels(); ++i) {
        if (s.labels[i] != k) continue;
        ++n;
        for (int d = 0; d < 8; ++d) sum[d] += s.features[i * 8 + d];
      }
      REQUIRE(n > 0);
      const Gaussian& g = b.scene.class_dists[k];
      for (int d = 0; d < 8; ++d) {
        const double z = std::abs(sum[d] / n - g.mean[d]) / (g.stddev[d] / std::sqrt(double(n)));
        CHECK(z < 5.0);
        if (z > 3.0) ++exceed;
      }
    }
  }
  CHECK(exceed <= 8);
}

TEST_CASE("augment identity, flip involution and label containment") {
  const Benchmark b = default_bench();
  const Scene s = generate_scene(b.scene, 5);
  CHECK(augment(s, 1, {1.0, 1.0, 64, FlipMode::kNever}) == s);
  CHECK(flip_horizontal(flip_horizontal(s)) == s);
  const Scene once = augment(s, 9, {1.0, 1.0, 64, FlipMode::kAlways});
  CHECK(flip_horizontal(once) == s);

  const Scene tiny = small_scene(4, 6, 6);
  std::set<std::int16_t> source(tiny.labels.begin(), tiny.labels.end());
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Scene a = augment(tiny, seed, {0.75, 2.0, 4, FlipMode::kRandom});
    CHECK(a.height == 4);
    for (std::int16_t l : a.labels) CHECK(source.count(l) == 1);
  }
  CHECK_THROWS_AS(augment(s, 1, {0.5, 0.5, 48, FlipMode::kNever}), InvalidArgument);
  CHECK_THROWS_AS(augment(s, 1, {1.0, 1.0, 0, FlipMode::kNever}), InvalidArgument);
}

TEST_CASE("augment transforms the anomaly mask with the features") {
  const Benchmark b = default_bench();
  const Scene s = inject_test_anomaly_at(generate_scene(b.scene, 2), 3, b.anomaly, 12, 20, 30);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene a = augment(s, seed, {0.75, 2.0, 48, FlipMode::kRandom});
    a.validate();
    for (std::size_t i = 0; i < a.pixels(); ++i) {
      CHECK((a.anomaly[i] != 0) == (a.labels[i] == kIgnoreLabel));
    }
  }
}

TEST_CASE("paste_negative examples") {
  const Scene s = small_scene(1);
  CHECK(paste_negative(s, Tensor(), 0, 0) == s);
  const Scene p = paste_negative(s, constant_patch(2, 3, 9.0), 0, 0);
  CHECK(std::count(p.labels.begin(), p.labels.end(), kNegativeLabel) == 4);
  CHECK(changed(s, p) == std::set<std::size_t>{0, 1, 7, 8});

  const Tensor a = constant_patch(2, 3, 1.0);
  const Tensor c = constant_patch(3, 3, -1.0);
  CHECK(paste_negative(paste_negative(s, a, 0, 0), c, 4, 3) ==
        paste_negative(paste_negative(s, c, 4, 3), a, 0, 0));
  CHECK_THROWS_AS(paste_negative(s, constant_patch(3, 3, 0.0), 7, 0), InvalidArgument);
  CHECK_THROWS_AS(paste_negative(s, constant_patch(2, 2, 0.0), 0, 0), InvalidArgument);
}

TEST_CASE("window operations never touch pixels outside their window") {
  const Scene s = small_scene(2, 5, 5);
  const Gaussian anomaly{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  for (int side = 1; side <= 5; ++side) {
    for (int r = 0; r + side <= 5; ++r) {
      for (int c = 0; c + side <= 5; ++c) {
        std::set<std::size_t> window;
        for (std::size_t i : window_indices(s, r, c, side)) window.insert(i);
        for (std::size_t i : changed(s, paste_negative(s, constant_patch(side, 3, 1e3), r, c))) {
          CHECK(window.count(i) == 1);
        }
        const Scene inj = inject_test_anomaly_at(s, 1, anomaly, side, r, c);
        CHECK(std::count(inj.anomaly.begin(), inj.anomaly.end(), 1) == side * side);
        for (std::size_t i : changed(s, inj)) CHECK(window.count(i) == 1);
      }
    }
  }
}

TEST_CASE("sample_patch_size range and uniformity") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK(sample_patch_size(seed, 0.25, 0.25, 48) == 12);
    const int p = sample_patch_size(seed, 16.0 / 768.0, 216.0 / 768.0, 768);
    CHECK(p >= 16);
    CHECK(p <= 216);
  }
  CHECK_THROWS_AS(sample_patch_size(1, 0.3, 0.2, 48), InvalidArgument);
  CHECK_THROWS_AS(sample_patch_size(1, 0.1, 1.0, 48), InvalidArgument);

  // Chi-squared goodness of fit over 10^4 draws, alpha = 0.01.
  Rng rng(2024);
  const int lo = 1;
  const int hi = 13;  // lround(0.02 * 48) .. lround(0.28 * 48)
  std::vector<int> counts(hi - lo + 1, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const int p = sample_patch_size(rng, 0.02, 0.28, 48);
    REQUIRE(p >= lo);
    REQUIRE(p <= hi);
    ++counts[p - lo];
  }
  const double expected = double(n) / counts.size();
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  CHECK(chi2 < boost::math::quantile(dist, 0.99));
}

TEST_CASE("crop_inlier returns only valid windows") {
  const Scene s = small_scene(3, 6, 6);
  const Tensor one = crop_inlier(s, 5, 1);
  REQUIRE(one.rows() == 1);
  bool found = false;
  for (int r = 0; r < 6 && !found; ++r) {
    for (int c = 0; c < 6 && !found; ++c) {
      const auto f = s.feature(r, c);
      found = std::equal(f.begin(), f.end(), one.row(0).begin());
    }
  }
  CHECK(found);

  // Block everything but the 3x3 window at (2, 3).
  Scene blocked = paste_negative(s, constant_patch(6, 3, 0.0), 0, 0);
  for (int r = 2; r < 5; ++r) {
    for (int c = 3; c < 6; ++c) {
      blocked.labels[blocked.index(r, c)] = s.label(r, c);
      const auto src = s.feature(r, c);
      std::copy(src.begin(), src.end(), blocked.feature(r, c).begin());
    }
  }
  const Scene target = crop_window(s, 2, 3, 3);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Tensor crop = crop_inlier(blocked, seed, 3);
    CHECK(std::equal(crop.data().begin(), crop.data().end(), target.features.begin()));
  }
  CHECK_THROWS_AS(crop_inlier(blocked, 1, 4), InvalidArgument);

  // Randomized: crops never include negative or anomalous pixels.
  const Benchmark b = default_bench();
  Scene mixed = paste_negative(generate_scene(b.scene, 4), constant_patch(20, 8, 50.0), 10, 10);
  mixed = inject_test_anomaly_at(mixed, 1, b.anomaly, 12, 40, 40);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Tensor crop = crop_inlier(mixed, seed, 8);
    for (double v : crop.data()) CHECK(v != 50.0);
  }
}

TEST_CASE("inject_test_anomaly examples") {
  const Benchmark b = default_bench();
  const Scene s = generate_scene(b.scene, 6);
  CHECK(inject_test_anomaly(s, 1, b.anomaly, 0) == s);
  const Scene a = inject_test_anomaly(s, 1, b.anomaly, 12);
  CHECK(std::count(a.anomaly.begin(), a.anomaly.end(), 1) == 144);
  a.validate();
  std::vector<double> mean(8, 0.0);
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    if (!a.anomaly[i]) continue;
    CHECK(a.labels[i] == kIgnoreLabel);
    for (int d = 0; d < 8; ++d) mean[d] += a.features[i * 8 + d] / 144.0;
  }
  for (int d = 0; d < 8; ++d) CHECK(std::abs(mean[d] - b.anomaly.mean[d]) <= 3.0 / 12.0);
  CHECK_THROWS_AS(inject_test_anomaly_at(s, 1, b.anomaly, 12, 60, 0), InvalidArgument);
}

TEST_CASE("scene serialization round-trips") {
  const Benchmark b = default_bench();
  Scene s = inject_test_anomaly(generate_scene(b.scene, 9), 2, b.anomaly, 12);
  s = paste_negative(s, constant_patch(3, 8, -4.5), 0, 0);
  std::stringstream ss;
  write_scene(ss, s);
  CHECK(read_scene(ss) == s);

  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_scene(bad), FormatError);
  std::stringstream text;
  write_scene_text(text, small_scene(1, 2, 2));
  CHECK(!text.str().empty());
}
