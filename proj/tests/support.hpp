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


// Shared test helpers: finite-difference gradient probes and small builders.

#ifndef SYNTHNEG_TESTS_SUPPORT_HPP_
#define SYNTHNEG_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "synthneg/autodiff.hpp"
#include "synthneg/flow.hpp"
#include "synthneg/optim.hpp"
#include "synthneg/random.hpp"
#include "synthneg/tensor.hpp"

namespace synthneg::testing {

struct GradCheck {
  double rel_error = 0.0;     // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

// Analytic gradients of the scalar f() with respect to `params`, as one flat vector.
inline std::vector<double> analytic_gradient(const std::function<ad::Var()>& f,
                                             const std::vector<ad::Var>& params) {
  for (ad::Var p : params) p.zero_grad();
  ad::backward(f());
  std::vector<double> g;
  for (const ad::Var& p : params) {
    const auto d = p.grad().data();
    g.insert(g.end(), d.begin(), d.end());
  }
  return g;
}

// Central differences of f() with step h on every entry of `params`.
inline std::vector<double> numeric_gradient(const std::function<ad::Var()>& f,
                                            const std::vector<ad::Var>& params, double h = 1e-5) {
  std::vector<double> g;
  for (ad::Var p : params) {
    Tensor& v = p.mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double up = f().item();
      v[i] = keep - h;
      const double down = f().item();
      v[i] = keep;
      g.push_back((up - down) / (2.0 * h));
    }
  }
  return g;
}

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline GradCheck check_gradient(const std::function<ad::Var()>& f,
                                const std::vector<ad::Var>& params, double h = 1e-5) {
  const std::vector<double> a = analytic_gradient(f, params);
  const std::vector<double> n = numeric_gradient(f, params, h);
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - n[i];
  GradCheck c;
  c.analytic_norm = norm(a);
  c.numeric_norm = norm(n);
  const double scale = std::max({c.analytic_norm, c.numeric_norm, 1e-12});
  c.rel_error = norm(diff) / scale;
  return c;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline Tensor uniform_tensor(Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Overwrites every flow parameter with uniform values in [-scale, scale].
inline void randomize(const flow::FlowParams& f, std::uint64_t seed, double scale) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (ad::Var p : f.all()) {
    for (double& v : p.mutable_value().data()) v = u(rng);
  }
}

// Two-component Gaussian mixture in the plane.
inline Tensor mixture_2d(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution pick(0.4);
  Tensor x({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    if (pick(rng)) {
      x.at(i, 0) = -1.5 + 0.5 * unit(rng);
      x.at(i, 1) = 0.5 * unit(rng);
    } else {
      x.at(i, 0) = 1.5 + 0.7 * unit(rng);
      x.at(i, 1) = 1.0 + 0.4 * unit(rng);
    }
  }
  return x;
}

// Maximum-likelihood fit of a small 2-D flow to mixture_2d samples.
inline flow::FlowParams train_flow_2d(int steps = 400) {
  flow::FlowConfig cfg;
  cfg.dim = 2;
  cfg.layers = 4;
  cfg.hidden = 16;
  const flow::FlowParams f = flow::init_flow(cfg, 17);
  const ad::Var data = ad::constant(mixture_2d(512, 18));
  optim::Optimizer opt(optim::Kind::kAdam, 1e-2, f.all());
  for (int t = 0; t < steps; ++t) {
    opt.zero_grad();
    ad::backward(ad::neg(ad::mean(flow::log_prob(f, data))));
    opt.step();
  }
  return f;
}

// Midpoint-rule integral of exp(log_prob) over [-lim, lim]^2.
inline double integrate_density_2d(const flow::FlowParams& f, double lim, std::size_t cells) {
  const double h = 2.0 * lim / static_cast<double>(cells);
  Tensor grid({cells * cells, 2});
  for (std::size_t i = 0; i < cells; ++i) {
    for (std::size_t j = 0; j < cells; ++j) {
      grid.at(i * cells + j, 0) = -lim + (static_cast<double>(i) + 0.5) * h;
      grid.at(i * cells + j, 1) = -lim + (static_cast<double>(j) + 0.5) * h;
    }
  }
  const Tensor lp = flow::log_prob(f, ad::constant(std::move(grid))).value();
  double s = 0.0;
  for (double v : lp.data()) s += std::exp(v);
  return s * h * h;
}

}  // namespace synthneg::testing

#endif  // SYNTHNEG_TESTS_SUPPORT_HPP_
