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

#ifndef SYNTHNEG_OPTIM_HPP_
#define SYNTHNEG_OPTIM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "synthneg/autodiff.hpp"
#include "synthneg/tensor.hpp"

namespace synthneg::optim {

enum class Kind { kAdam, kAdamax };

struct OptimizerState {
  Kind kind = Kind::kAdam;
  std::int64_t step_count = 0;
  std::vector<Tensor> first_moment;
  // Adam: exponential average of g^2. Adamax: infinity-norm accumulator u_t.
  std::vector<Tensor> second_moment;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

OptimizerState make_state(Kind kind, double lr, std::span<const Tensor> params,
                          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// One update in place. Increments step_count before computing the bias
// corrections. No weight decay, no clipping.
void optimizer_step(OptimizerState& state, std::span<Tensor* const> params,
                    std::span<const Tensor* const> grads);

// Binds an OptimizerState to graph parameters.
class Optimizer {
 public:
  Optimizer(Kind kind, double lr, std::vector<ad::Var> params);

  void step();
  void zero_grad();
  void set_lr(double lr) { state_.lr = lr; }
  const OptimizerState& state() const { return state_; }
  const std::vector<ad::Var>& params() const { return params_; }

 private:
  OptimizerState state_;
  std::vector<ad::Var> params_;
};

// Half-cosine decay from lr_max at step 0 to lr_min at step == total.
double cosine_lr(std::int64_t step, std::int64_t total, double lr_max, double lr_min);

}  // namespace synthneg::optim

#endif  // SYNTHNEG_OPTIM_HPP_
