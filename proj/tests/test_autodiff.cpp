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
#include <numbers>
#include <string>
#include <vector>

#include "support.hpp"
#include "synthneg/autodiff.hpp"
#include "synthneg/error.hpp"
#include "synthneg/optim.hpp"

using namespace synthneg;
using synthneg::testing::check_gradient;
using synthneg::testing::uniform_tensor;

namespace {

constexpr double kFdTol = 1e-4;

void expect_fd(const std::function<ad::Var()>& f, const std::vector<ad::Var>& params,
               const char* what) {
  const auto c = check_gradient(f, params);
  INFO(what << " rel_error=" << c.rel_error);
  CHECK(c.rel_error <= kFdTol);
  CHECK(c.analytic_norm > 0.0);
}

// Contracts a tensor against fixed weights so every output entry matters.
ad::Var project(const ad::Var& y, std::uint64_t seed) {
  return ad::sum(y * ad::constant(uniform_tensor(y.shape(), seed, -1.0, 1.0)));
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
  for (double c : {-30.0, 0.0, 2.5, 700.0}) {
    const auto y = ad::softmax(ad::constant(Tensor({1, 3}, {c, c, c})));
    for (double v : y.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("logsumexp examples") {
  CHECK(ad::logsumexp(ad::constant(Tensor({1, 1}, {-4.25}))).item() == -4.25);
  // ln(e + e^2 + e^3) summed directly in long double.
  const long double direct = std::log(std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L));
  const double got = ad::logsumexp(ad::constant(Tensor({1, 3}, {1, 2, 3}))).item();
  CHECK(std::abs(got - static_cast<double>(direct)) < 1e-14);
  CHECK(std::abs(got - 3.40760596) < 1e-8);
}

TEST_CASE("softmax rows sum to one and log_softmax matches log of softmax") {
  const Tensor x = uniform_tensor({6, 5}, 11, -20.0, 20.0);
  const Tensor p = ad::softmax(ad::constant(x)).value();
  const Tensor lp = ad::log_softmax(ad::constant(x)).value();
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      s += p.at(r, c);
      CHECK(std::abs(lp.at(r, c) - std::log(p.at(r, c))) <= 1e-9);
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("stop_gradient examples") {
  ad::Var x = ad::parameter(Tensor({2}, {1.0, 2.0}));
  const ad::Var s = ad::stop_gradient(x);
  CHECK(s.value() == x.value());
  ad::backward(ad::sum(s));
  CHECK(x.grad() == Tensor({2}, {0.0, 0.0}));

  ad::Var y = ad::parameter(Tensor({1}, {3.0}));
  ad::backward(y * y + ad::stop_gradient(y * y));
  CHECK(y.grad()[0] == 6.0);

  ad::Var z = ad::parameter(Tensor({1}, {3.0}));
  const auto once = ad::stop_gradient(z * z);
  const auto twice = ad::stop_gradient(ad::stop_gradient(z * z));
  CHECK(once.value() == twice.value());
  ad::backward(z * twice);
  CHECK(z.grad()[0] == 9.0);
}

TEST_CASE("stop_gradient blocks every upstream parameter") {
  ad::Var w = ad::parameter(uniform_tensor({3, 4}, 1));
  ad::Var v = ad::parameter(uniform_tensor({4, 2}, 2));
  const ad::Var x = ad::constant(uniform_tensor({5, 3}, 3));
  const ad::Var h = ad::tanh(ad::matmul(x, w));
  ad::backward(ad::sum(ad::matmul(ad::stop_gradient(h), v)));
  for (double g : w.grad().data()) CHECK(g == 0.0);
  CHECK(testing::max_abs({v.grad().data().begin(), v.grad().data().end()}) > 0.0);
}

TEST_CASE("backward examples") {
  ad::Var x = ad::parameter(Tensor({3}, {0.3, -1.0, 4.0}));
  ad::backward(ad::sum(x));
  CHECK(x.grad() == Tensor({3}, {1.0, 1.0, 1.0}));

  ad::Var y = ad::parameter(Tensor({1, 2}, {0.0, 0.0}));
  ad::backward(ad::logsumexp(y));
  CHECK(y.grad()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y.grad()[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("backward accumulates across calls and rejects non-scalar losses") {
  ad::Var x = ad::parameter(Tensor({2}, {1.0, -2.0}));
  ad::backward(ad::sum(x * x));
  ad::backward(ad::sum(x * x));
  CHECK(x.grad() == Tensor({2}, {4.0, -8.0}));
  x.zero_grad();
  CHECK(x.grad() == Tensor({2}, {0.0, 0.0}));
  CHECK_THROWS_AS(ad::backward(x * x), InvalidArgument);
}

TEST_CASE("a node used twice receives both contributions") {
  ad::Var x = ad::parameter(Tensor({1}, {1.5}));
  const ad::Var e = ad::exp(x);
  ad::backward(e * e + e);
  CHECK(x.grad()[0] == doctest::Approx(2.0 * std::exp(3.0) + std::exp(1.5)).epsilon(1e-14));
}

TEST_CASE("finite differences agree for every op") {
  const ad::Var a = ad::parameter(uniform_tensor({3, 4}, 21));
  const ad::Var b = ad::parameter(uniform_tensor({3, 4}, 22));
  const ad::Var row = ad::parameter(uniform_tensor({4}, 23));
  const ad::Var w = ad::parameter(uniform_tensor({4, 5}, 24));
  const ad::Var bias = ad::parameter(uniform_tensor({5}, 25));
  const ad::Var pos = ad::parameter(uniform_tensor({3, 4}, 26, 0.2, 2.0));
  // Keep elementwise max away from ties.
  const ad::Var c = ad::parameter(
      Tensor({3, 4}, {0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.05, 0.95, 0.15, 0.85, 0.25, 0.75}));
  const ad::Var d = ad::parameter(Tensor({3, 4}, std::vector<double>(12, 0.5)));
  const std::vector<std::size_t> rows = {2, 0, 2};
  const std::vector<std::size_t> idx = {3, 0, 1};

  expect_fd([&] { return project(a + b, 1); }, {a, b}, "add");
  expect_fd([&] { return project(a - row, 2); }, {a, row}, "sub broadcast row");
  expect_fd([&] { return project(a * b, 3); }, {a, b}, "mul");
  expect_fd([&] { return project(a * row, 4); }, {a, row}, "mul broadcast row");
  expect_fd([&] { return project(ad::matmul(a, w), 5); }, {a, w}, "matmul");
  expect_fd([&] { return project(ad::affine(a, w, bias), 6); }, {a, w, bias}, "affine");
  expect_fd([&] { return project(ad::tanh(a), 7); }, {a}, "tanh");
  expect_fd([&] { return project(ad::sigmoid(a), 8); }, {a}, "sigmoid");
  expect_fd([&] { return project(ad::exp(a), 9); }, {a}, "exp");
  expect_fd([&] { return project(ad::log(pos), 10); }, {pos}, "log");
  expect_fd([&] { return project(ad::softmax(a), 11); }, {a}, "softmax");
  expect_fd([&] { return project(ad::log_softmax(a), 12); }, {a}, "log_softmax");
  expect_fd([&] { return project(ad::logsumexp(a), 13); }, {a}, "logsumexp");
  expect_fd([&] { return project(ad::sum_last(a), 14); }, {a}, "sum_last");
  expect_fd([&] { return ad::mean(a * a); }, {a}, "mean");
  expect_fd([&] { return project(ad::scale(ad::add_scalar(a, 0.3), -1.7), 15); }, {a}, "scale");
  expect_fd([&] { return project(ad::neg(a), 16); }, {a}, "neg");
  expect_fd([&] { return project(ad::maximum(c, d), 17); }, {c, d}, "maximum");
  expect_fd([&] { return project(ad::relu(ad::add_scalar(c, -0.5)), 18); }, {c}, "relu");
  expect_fd([&] { return project(ad::reshape(a, {4, 3}), 19); }, {a}, "reshape");
  expect_fd([&] { return project(ad::gather_rows(a, rows), 20); }, {a}, "gather_rows");
  expect_fd(
      [&] {
        const std::vector<std::size_t> to = {1, 2};
        return project(ad::scatter_rows(a, to, ad::gather_rows(b, to)), 21);
      },
      {a, b}, "scatter_rows");
  expect_fd(
      [&] {
        const std::vector<ad::Var> parts = {a, b};
        return project(ad::concat_rows(parts), 22);
      },
      {a, b}, "concat_rows");
  expect_fd(
      [&] {
        const std::vector<ad::Var> parts = {ad::slice_cols(a, 1, 3), b};
        return project(ad::concat_cols(parts), 23);
      },
      {a, b}, "slice_cols / concat_cols");
  expect_fd([&] { return project(ad::pick(a, idx), 24); }, {a}, "pick");
}

TEST_CASE("shape mismatches name the op and both shapes") {
  const ad::Var a = ad::constant(Tensor({2, 3}));
  const ad::Var b = ad::constant(Tensor({3, 2}));
  try {
    (void)ad::add(a, b);
    FAIL("expected a shape error");
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("(2, 3)") != std::string::npos);
  }
  CHECK_THROWS_AS((void)ad::matmul(a, a), InvalidArgument);
  const std::vector<std::size_t> dup = {0, 0};
  CHECK_THROWS_AS((void)ad::scatter_rows(a, dup, ad::constant(Tensor({2, 3}))), InvalidArgument);
}

TEST_CASE("checked mode reports non-finite values by op") {
  const ad::Var x = ad::constant(Tensor({1}, {-1.0}));
  CHECK_NOTHROW((void)ad::log(x));
  ad::CheckedMode on;
  CHECK(ad::checked_mode_enabled());
  try {
    (void)ad::log(x);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
}

TEST_CASE("Adam single step example") {
  std::vector<Tensor> params = {Tensor({1}, {0.0})};
  const std::vector<Tensor> grads = {Tensor({1}, {1.0})};
  auto st = optim::make_state(optim::Kind::kAdam, 0.1, params);
  Tensor* p[] = {&params[0]};
  const Tensor* g[] = {&grads[0]};
  optim::optimizer_step(st, p, g);
  CHECK(st.step_count == 1);
  // m_hat = 1, v_hat = 1: delta = -lr / (1 + eps).
  CHECK(params[0][0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(params[0][0] == doctest::Approx(-0.0999999999).epsilon(1e-9));
}

TEST_CASE("zero gradient leaves parameters unchanged and decays moments") {
  for (auto kind : {optim::Kind::kAdam, optim::Kind::kAdamax}) {
    std::vector<Tensor> params = {Tensor({2}, {1.0, -1.0})};
    auto st = optim::make_state(kind, 0.01, params);
    Tensor* p[] = {&params[0]};
    const Tensor zero({2});
    const Tensor* g[] = {&zero};
    for (int i = 0; i < 3; ++i) optim::optimizer_step(st, p, g);
    CHECK(params[0] == Tensor({2}, {1.0, -1.0}));
    CHECK(st.step_count == 3);
  }
  std::vector<Tensor> params = {Tensor({2}, {1.0, -1.0})};
  auto st = optim::make_state(optim::Kind::kAdam, 0.01, params);
  Tensor* p[] = {&params[0]};
  Tensor grad({2}, {0.5, -0.25});
  const Tensor* g[] = {&grad};
  optim::optimizer_step(st, p, g);
  const Tensor m = st.first_moment[0];
  const Tensor v = st.second_moment[0];
  grad = Tensor({2});
  optim::optimizer_step(st, p, g);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(st.first_moment[0][i] == doctest::Approx(0.9 * m[i]).epsilon(1e-15));
    CHECK(st.second_moment[0][i] == doctest::Approx(0.999 * v[i]).epsilon(1e-15));
  }
}

TEST_CASE("Adamax with a constant gradient keeps u equal to |g|") {
  std::vector<Tensor> params = {Tensor({2}, {0.0, 0.0})};
  const std::vector<Tensor> grads = {Tensor({2}, {-0.7, 0.3})};
  auto st = optim::make_state(optim::Kind::kAdamax, 0.002, params);
  Tensor* p[] = {&params[0]};
  const Tensor* g[] = {&grads[0]};
  for (int t = 0; t < 25; ++t) {
    optim::optimizer_step(st, p, g);
    CHECK(st.second_moment[0][0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(st.second_moment[0][1] == doctest::Approx(0.3).epsilon(1e-15));
  }
}

TEST_CASE("optimizer validation and determinism") {
  std::vector<Tensor> params = {Tensor({2})};
  CHECK_THROWS_AS(optim::make_state(optim::Kind::kAdam, 0.0, params), InvalidArgument);
  CHECK_THROWS_AS(optim::make_state(optim::Kind::kAdam, 0.1, params, 1.0), InvalidArgument);
  auto st = optim::make_state(optim::Kind::kAdam, 0.1, params);
  const Tensor wrong({3});
  Tensor* p[] = {&params[0]};
  const Tensor* g[] = {&wrong};
  CHECK_THROWS_AS(optim::optimizer_step(st, p, g), InvalidArgument);

  auto run = [](optim::Kind kind) {
    std::vector<Tensor> ps = {uniform_tensor({3, 3}, 5)};
    auto s = optim::make_state(kind, 0.05, ps);
    Tensor* pp[] = {&ps[0]};
    for (int t = 0; t < 20; ++t) {
      const Tensor grad = uniform_tensor({3, 3}, 100 + t);
      const Tensor* gg[] = {&grad};
      optim::optimizer_step(s, pp, gg);
    }
    return ps[0];
  };
  for (auto kind : {optim::Kind::kAdam, optim::Kind::kAdamax}) CHECK(run(kind) == run(kind));
}

TEST_CASE("Optimizer wrapper minimizes a quadratic") {
  ad::Var x = ad::parameter(Tensor({2}, {3.0, -2.0}));
  optim::Optimizer opt(optim::Kind::kAdam, 0.1, {x});
  for (int t = 0; t < 500; ++t) {
    opt.zero_grad();
    ad::backward(ad::sum(x * x));
    opt.step();
  }
  CHECK(std::abs(x.value()[0]) < 1e-2);
  CHECK(std::abs(x.value()[1]) < 1e-2);
  CHECK_THROWS_AS(optim::Optimizer(optim::Kind::kAdam, 0.1, {ad::exp(x)}), InvalidArgument);
}

TEST_CASE("cosine_lr examples") {
  CHECK(optim::cosine_lr(0, 10, 1e-3, 1e-5) == 1e-3);
  CHECK(optim::cosine_lr(10, 10, 1e-3, 1e-5) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(optim::cosine_lr(50, 100, 1e-5, 1e-7) == doctest::Approx(5.05e-6).epsilon(1e-12));
  CHECK_THROWS_AS(optim::cosine_lr(11, 10, 1e-3, 1e-5), InvalidArgument);
  CHECK_THROWS_AS(optim::cosine_lr(0, 0, 1e-3, 1e-5), InvalidArgument);
  double prev = 1.0;
  for (int s = 0; s <= 40; ++s) {
    const double lr = optim::cosine_lr(s, 40, 1e-3, 1e-5);
    CHECK(lr <= prev);
    prev = lr;
  }
}
