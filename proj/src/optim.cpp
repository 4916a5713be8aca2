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

#include "synthneg/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "synthneg/error.hpp"

namespace synthneg::optim {

void OptimizerState::validate() const {
  if (!(lr > 0.0)) throw InvalidArgument("optimizer: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("optimizer: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw InvalidArgument("optimizer: eps must be > 0");
  if (first_moment.size() != second_moment.size()) {
    throw InvalidArgument("optimizer: moment lists differ in length");
  }
}

OptimizerState make_state(Kind kind, double lr, std::span<const Tensor> params, double beta1,
                          double beta2, double eps) {
  OptimizerState s;
  s.kind = kind;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  for (const Tensor& p : params) {
    s.first_moment.push_back(Tensor::zeros_like(p));
    s.second_moment.push_back(Tensor::zeros_like(p));
  }
  s.validate();
  return s;
}

void optimizer_step(OptimizerState& state, std::span<Tensor* const> params,
                    std::span<const Tensor* const> grads) {
  state.validate();
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw InvalidArgument("optimizer_step: " + std::to_string(params.size()) + " params, " +
                          std::to_string(grads.size()) + " grads, " +
                          std::to_string(state.first_moment.size()) + " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() ||
        params[i]->shape() != state.first_moment[i].shape()) {
      throw InvalidArgument("optimizer_step: shape mismatch at parameter " + std::to_string(i) +
                            ": param " + params[i]->shape_str() + ", grad " +
                            grads[i]->shape_str() + ", moment " +
                            state.first_moment[i].shape_str());
    }
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double bias1 = 1.0 - std::pow(b1, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    if (state.kind == Kind::kAdam) {
      const double bias2 = 1.0 - std::pow(b2, t);
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = b1 * m[j] + (1.0 - b1) * g[j];
        v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
        const double mhat = m[j] / bias1;
        const double vhat = v[j] / bias2;
        p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
      }
    } else {
      const double step = state.lr / bias1;
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = b1 * m[j] + (1.0 - b1) * g[j];
        v[j] = std::max(b2 * v[j], std::abs(g[j]));
        p[j] -= step * m[j] / (v[j] + state.eps);
      }
    }
  }
}

Optimizer::Optimizer(Kind kind, double lr, std::vector<ad::Var> params)
    : params_(std::move(params)) {
  std::vector<Tensor> values;
  values.reserve(params_.size());
  for (const ad::Var& p : params_) {
    if (!p.requires_grad() || !p.is_leaf()) {
      throw InvalidArgument("Optimizer: every entry must be a trainable leaf");
    }
    values.push_back(p.value());
  }
  state_ = make_state(kind, lr, values);
}

void Optimizer::step() {
  std::vector<Tensor*> ps;
  std::vector<const Tensor*> gs;
  ps.reserve(params_.size());
  gs.reserve(params_.size());
  for (ad::Var& p : params_) {
    ps.push_back(&p.mutable_value());
    gs.push_back(&p.grad());
  }
  optimizer_step(state_, ps, gs);
}

void Optimizer::zero_grad() {
  for (ad::Var& p : params_) p.zero_grad();
}

double cosine_lr(std::int64_t step, std::int64_t total, double lr_max, double lr_min) {
  if (total <= 0) throw InvalidArgument("cosine_lr: total must be > 0");
  if (step < 0 || step > total) {
    throw InvalidArgument("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                          std::to_string(total) + "]");
  }
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace synthneg::optim
