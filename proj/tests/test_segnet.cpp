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

#include <cmath>
#include <numeric>
#include <sstream>

#include "support.hpp"
#include "synthneg/error.hpp"
#include "synthneg/segnet.hpp"

using namespace synthneg;
using synthneg::testing::uniform_tensor;

namespace {

seg::SegNetConfig small_config() {
  seg::SegNetConfig c;
  c.feature_dim = 4;
  c.hidden = 6;
  c.layers = 2;
  c.classes = 3;
  return c;
}

seg::PixelPrediction prediction(Tensor class_logits, Tensor ood_logits) {
  seg::PixelPrediction p;
  p.height = static_cast<int>(class_logits.rows());
  p.width = 1;
  p.class_logits = ad::constant(std::move(class_logits));
  p.ood_logits = ad::constant(std::move(ood_logits));
  return p;
}

}  // namespace

TEST_CASE("zero parameters give zero logits") {
  const auto params = seg::zero_segnet(small_config());
  const auto pred = seg::forward(params, uniform_tensor({12, 4}, 1), 3, 4);
  for (double v : pred.class_logits.value().data()) CHECK(v == 0.0);
  const Tensor post = seg::class_posterior(pred, 1.0);
  for (double v : post.data()) CHECK(v == doctest::Approx(1.0 / 3));
  for (std::size_t i = 0; i < 12; ++i) CHECK(seg::ood_posterior(pred, 1.0).at(i, 1) == 0.5);
}

TEST_CASE("forward is per-pixel: permuting pixels permutes predictions") {
  const auto params = seg::init_segnet(small_config(), 3);
  const Tensor x = uniform_tensor({10, 4}, 4);
  std::vector<std::size_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[2], perm[7]);
  Tensor xp({10, 4});
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t d = 0; d < 4; ++d) xp.at(i, d) = x.at(perm[i], d);
  }
  const auto a = seg::forward(params, x, 10, 1);
  const auto b = seg::forward(params, xp, 10, 1);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(b.class_logits.value().at(i, k) == a.class_logits.value().at(perm[i], k));
    }
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(b.ood_logits.value().at(i, k) == a.ood_logits.value().at(perm[i], k));
    }
  }
  CHECK_THROWS_AS(seg::forward(params, uniform_tensor({10, 5}, 4), 10, 1), InvalidArgument);
  CHECK_THROWS_AS(seg::forward(params, x, 3, 3), InvalidArgument);
}

TEST_CASE("gradient of the mean class logit matches finite differences") {
  for (auto act : {seg::Activation::kTanh, seg::Activation::kRelu}) {
    auto cfg = small_config();
    cfg.activation = act;
    const auto params = seg::init_segnet(cfg, 8);
    const ad::Var x = ad::constant(uniform_tensor({7, 4}, 9));
    auto f = [&] { return ad::mean(seg::forward(params, x, 7, 1).class_logits); };
    std::vector<ad::Var> trunk = params.trunk_weights;
    trunk.insert(trunk.end(), params.trunk_biases.begin(), params.trunk_biases.end());
    const auto c = testing::check_gradient(f, trunk);
    CHECK(c.rel_error <= 1e-4);
    CHECK(c.analytic_norm > 0.0);
  }
}

TEST_CASE("class_posterior examples") {
  const auto equal = prediction(Tensor({1, 4}, 2.5), Tensor({1, 2}));
  for (double t : {0.1, 1.0, 7.0}) {
    const Tensor p = seg::class_posterior(equal, t);
    for (double v : p.data()) CHECK(v == doctest::Approx(0.25));
  }
  const auto spread = prediction(Tensor({1, 3}, {-3.0, 0.0, 5.0}), Tensor({1, 2}));
  const Tensor hot = seg::class_posterior(spread, 1e6);
  for (double v : hot.data()) CHECK(std::abs(v - 1.0 / 3) <= 1e-5);
  const auto p = seg::class_posterior(prediction(Tensor({1, 2}, {0.0, std::log(3.0)}),
                                                 Tensor({1, 2})), 1.0);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(seg::class_posterior(spread, 0.0), InvalidArgument);
  CHECK_THROWS_AS(seg::ood_posterior(spread, -1.0), InvalidArgument);
}

TEST_CASE("ood_posterior examples") {
  const auto eq = prediction(Tensor({1, 2}), Tensor({1, 2}, {1.7, 1.7}));
  CHECK(seg::ood_posterior(eq, 2.0).at(0, seg::kOutlierColumn) == 0.5);
  const auto p = prediction(Tensor({1, 2}), Tensor({1, 2}, {0.0, std::log(3.0)}));
  const double expected = std::exp(std::log(3.0) / 2) / (1.0 + std::exp(std::log(3.0) / 2));
  const double got = seg::ood_posterior(p, 2.0).at(0, seg::kOutlierColumn);
  CHECK(got == doctest::Approx(expected).epsilon(1e-14));
  CHECK(std::abs(got - 0.6340) < 5e-5);
  const auto shifted = prediction(Tensor({1, 2}), Tensor({1, 2}, {4.0, 4.0 + std::log(3.0)}));
  CHECK(seg::ood_posterior(shifted, 2.0).at(0, 1) == doctest::Approx(got).epsilon(1e-14));
}

TEST_CASE("log_density examples") {
  CHECK(seg::log_density(prediction(Tensor({1, 4}), Tensor({1, 2})))[0] ==
        doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(std::abs(seg::log_density(prediction(Tensor({1, 3}, {1, 2, 3}), Tensor({1, 2})))[0] -
                 3.40760596) < 1e-8);
  const Tensor z = uniform_tensor({5, 4}, 3, -10.0, 10.0);
  Tensor shifted = z;
  for (double& v : shifted.data()) v += 0.5;
  const Tensor a = seg::log_density(prediction(z, Tensor({5, 2})));
  const Tensor b = seg::log_density(prediction(shifted, Tensor({5, 2})));
  for (std::size_t i = 0; i < 5; ++i) CHECK(b[i] - a[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("posterior invariants on random logits") {
  const Tensor z = uniform_tensor({50, 4}, 12, -8.0, 8.0);
  const auto pred = prediction(z, uniform_tensor({50, 2}, 13));
  const auto argmax = seg::predicted_classes(pred);
  for (double t : {0.25, 1.0, 2.0, 10.0}) {
    const Tensor p = seg::class_posterior(pred, t);
    for (std::size_t r = 0; r < 50; ++r) {
      double s = 0.0;
      std::size_t best = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        s += p.at(r, k);
        if (p.at(r, k) > p.at(r, best)) best = k;
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
      CHECK(static_cast<int>(best) == argmax[r]);
    }
  }
}

TEST_CASE("log_density ignores the outlier head") {
  const auto params = seg::init_segnet(small_config(), 5);
  const Tensor x = uniform_tensor({9, 4}, 6);
  const Tensor before = seg::log_density(seg::forward(params, x, 9, 1));
  auto perturbed = params.clone();
  for (ad::Var v : perturbed.outlier_head()) {
    for (double& w : v.mutable_value().data()) w += 3.0;
  }
  const auto after = seg::forward(perturbed, x, 9, 1);
  CHECK(seg::log_density(after) == before);
  CHECK(after.ood_logits.value() != seg::forward(params, x, 9, 1).ood_logits.value());
}

TEST_CASE("forward is deterministic and detach blocks parameter gradients") {
  const auto params = seg::init_segnet(small_config(), 5);
  const Tensor x = uniform_tensor({9, 4}, 6);
  CHECK(seg::forward(params, x, 9, 1).class_logits.value() ==
        seg::forward(params, x, 9, 1).class_logits.value());
  ad::Var input = ad::parameter(x);
  const auto pred = seg::forward(params, input, 9, 1, true);
  ad::backward(ad::mean(pred.class_logits));
  for (const ad::Var& p : params.all()) {
    for (double g : p.grad().data()) CHECK(g == 0.0);
  }
  CHECK(testing::max_abs({input.grad().data().begin(), input.grad().data().end()}) > 0.0);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  const auto params = seg::init_segnet(small_config(), 21);
  std::stringstream ss;
  seg::write_segnet(ss, params);
  const auto loaded = seg::read_segnet(ss);
  CHECK(loaded.values() == params.values());
  CHECK(loaded.config.activation == params.config.activation);
  const Tensor x = uniform_tensor({4, 4}, 1);
  CHECK(seg::forward(loaded, x, 2, 2).ood_logits.value() ==
        seg::forward(params, x, 2, 2).ood_logits.value());

  std::string bytes = ss.str();
  bytes[0] = 'X';
  std::stringstream bad(bytes);
  CHECK_THROWS_AS(seg::read_segnet(bad), FormatError);
  std::stringstream truncated(ss.str().substr(0, 40));
  CHECK_THROWS_AS(seg::read_segnet(truncated), FormatError);
  CHECK_THROWS_AS(seg::load_segnet("/nonexistent/dir/x.snsg"), IoError);
}
