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

#include "loss_fixture.hpp"
#include "support.hpp"
#include "synthneg/error.hpp"
#include "synthneg/losses.hpp"

using namespace synthneg;
using namespace synthneg::loss;
using synthneg::testing::flow_grad_norm;
using synthneg::testing::make_batch;
using synthneg::testing::mixed_labels;
using synthneg::testing::small_flow;
using synthneg::testing::small_seg;
using synthneg::testing::uniform_tensor;
using Fixture = synthneg::testing::RoutingFixture;

namespace {

constexpr std::int16_t NEG = data::kNegativeLabel;
constexpr std::int16_t IGN = data::kIgnoreLabel;

seg::PixelPrediction prediction(Tensor class_logits, Tensor ood_logits) {
  seg::PixelPrediction p;
  p.height = static_cast<int>(class_logits.rows());
  p.width = 1;
  p.class_logits = ad::constant(std::move(class_logits));
  p.ood_logits = ad::constant(std::move(ood_logits));
  return p;
}

// Independent long-double evaluation of the per-pixel quantities.
long double lse(std::span<const double> z) {
  long double m = z[0];
  for (double v : z) m = std::max<long double>(m, v);
  long double s = 0;
  for (double v : z) s += std::exp(static_cast<long double>(v) - m);
  return m + std::log(s);
}

long double jsd_oracle(std::span<const double> z) {
  const long double l = lse(z);
  const long double k = static_cast<long double>(z.size());
  long double a = 0, b = 0;
  for (double v : z) {
    const long double p = std::exp(v - l);
    const long double m = 0.5L * p + 0.5L / k;
    a += p * (std::log(std::max<long double>(p, 1e-12L)) - std::log(m));
    b += (1.0L / k) * std::log((1.0L / k) / m);
  }
  return 0.5L * a + 0.5L * b;
}

struct OracleTerms {
  long double cls = 0, d_in = 0, d_out = 0, x = 0, jsd = 0;
};

OracleTerms oracle_terms(const Tensor& z, const Tensor& o, const std::vector<std::int16_t>& labels,
                         int k) {
  OracleTerms t;
  int nin = 0, nneg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto zr = z.row(i);
    const auto orow = o.row(i);
    if (data::is_inlier_label(labels[i], k)) {
      ++nin;
      t.cls += lse(zr) - zr[labels[i]];
      t.d_in += lse(orow) - orow[seg::kInlierColumn];
    } else if (labels[i] == NEG) {
      ++nneg;
      t.d_out += lse(orow) - orow[seg::kOutlierColumn];
      t.x += lse(zr);
      t.jsd += jsd_oracle(zr);
    }
  }
  t.cls /= nin;
  t.d_in /= nin;
  if (nneg > 0) {
    t.d_out /= nneg;
    t.x /= nneg;
    t.jsd /= nneg;
  }
  return t;
}

long double oracle_seg(const OracleTerms& t, const LossWeights& w, Variant v) {
  switch (v) {
    case Variant::kDenseHybrid:
    case Variant::kNFHybridJS:
    case Variant::kNFHybridLdLx:
    case Variant::kNFHybridLd:
      return t.cls + t.d_in + w.beta_d * t.d_out + w.beta_x * t.x;
    case Variant::kOODHead:
    case Variant::kNFOODHead:
      return t.cls + t.d_in + w.ood_head_beta * t.d_out;
    case Variant::kNFlowJS:
      return t.cls + w.beta_jsd * t.jsd;
  }
  return 0;
}

}  // namespace

TEST_CASE("variant table") {
  struct Row {
    Variant v;
    data::NegativeSourceKind src;
    bool energy, head, jsd_flow;
    unsigned routes;
  };
  using data::NegativeSourceKind;
  const Row rows[] = {
      {Variant::kDenseHybrid, NegativeSourceKind::kAuxiliary, true, true, false, 0},
      {Variant::kNFlowJS, NegativeSourceKind::kFlow, false, false, true, kTermJsd},
      {Variant::kNFHybridJS, NegativeSourceKind::kFlow, true, true, true, kTermJsd},
      {Variant::kNFHybridLdLx, NegativeSourceKind::kFlow, true, true, false, kTermLd | kTermLx},
      {Variant::kNFHybridLd, NegativeSourceKind::kFlow, true, true, false, kTermLd},
      {Variant::kOODHead, NegativeSourceKind::kAuxiliary, false, true, false, 0},
      {Variant::kNFOODHead, NegativeSourceKind::kFlow, false, true, false, 0},
  };
  for (const Row& r : rows) {
    const auto c = VariantConfig::make(r.v);
    CHECK(c.source == r.src);
    CHECK(c.use_energy == r.energy);
    CHECK(c.use_ood_head == r.head);
    CHECK(c.use_jsd_in_flow_loss == r.jsd_flow);
    CHECK(c.grads_to_flow == r.routes);
    CHECK_NOTHROW(c.validate());
    CHECK(parse_variant(variant_name(r.v)) == r.v);
  }
  CHECK(parse_variant("nf-hybrid-ldlx") == Variant::kNFHybridLdLx);
  CHECK(parse_variant("NF_Hybrid_Ld") == Variant::kNFHybridLd);
  CHECK_THROWS_AS(parse_variant("hybrid"), InvalidArgument);
  CHECK(all_variants().size() == 7);

  auto bad = VariantConfig::make(Variant::kDenseHybrid);
  bad.grads_to_flow = kTermLd;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  auto bad2 = VariantConfig::make(Variant::kNFHybridLdLx);
  bad2.source = data::NegativeSourceKind::kAuxiliary;
  CHECK_THROWS_AS(bad2.validate(), InvalidArgument);
  LossWeights w;
  w.beta_d = -1;
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
}

TEST_CASE("loss_cls examples") {
  const std::vector<std::int16_t> l4 = {0, 3, 2};
  CHECK(loss_cls(prediction(Tensor({3, 4}), Tensor({3, 2})), l4, 4).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-15));
  const std::vector<std::int16_t> l2 = {0, 1};
  const double v = loss_cls(prediction(Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2, 2})), l2, 2).item();
  CHECK(v == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-15));
  CHECK(std::abs(v - 0.31326) < 1e-5);
  const std::vector<std::int16_t> sure = {1};
  CHECK(loss_cls(prediction(Tensor({1, 2}, {-40, 40}), Tensor({1, 2})), sure, 2).item() < 1e-30);
  const std::vector<std::int16_t> none = {NEG, IGN};
  CHECK_THROWS_AS(loss_cls(prediction(Tensor({2, 2}), Tensor({2, 2})), none, 2), InvalidArgument);
}

TEST_CASE("loss_d examples") {
  const std::vector<std::int16_t> l = {0, NEG, 1, NEG};
  const auto d = loss_d(prediction(Tensor({4, 2}), Tensor({4, 2}, 0.3)), l, 2);
  CHECK(d.total().item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  const std::vector<std::int16_t> one = {0};
  const auto s = loss_d(prediction(Tensor({1, 2}), Tensor({1, 2}, {std::log(3.0), 0.0})), one, 2);
  CHECK(s.inlier.item() == doctest::Approx(-std::log(0.75)).epsilon(1e-15));
  CHECK(std::abs(s.inlier.item() - 0.2877) < 1e-4);
  CHECK(s.negative.item() == 0.0);
  const std::vector<std::int16_t> sep = {0, NEG};
  const auto p = loss_d(prediction(Tensor({2, 2}), Tensor({2, 2}, {40, -40, -40, 40})), sep, 2);
  CHECK(p.total().item() < 1e-30);
}

TEST_CASE("loss_x examples") {
  const std::vector<std::int16_t> l = {0, NEG, NEG};
  CHECK(loss_x(prediction(Tensor({3, 4}), Tensor({3, 2})), l, 4).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-15));
  const Tensor z = uniform_tensor({3, 4}, 3);
  const double base = loss_x(prediction(z, Tensor({3, 2})), l, 4).item();
  Tensor shifted = z;
  for (std::size_t r = 1; r < 3; ++r) {
    for (double& v : shifted.row(r)) v += 1.25;
  }
  CHECK(loss_x(prediction(shifted, Tensor({3, 2})), l, 4).item() - base ==
        doctest::Approx(1.25).epsilon(1e-12));
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor lower = z;
    for (std::size_t r = 1; r < 3; ++r) {
      for (double& v : lower.row(r)) v -= u(rng);
    }
    CHECK(loss_x(prediction(lower, Tensor({3, 2})), l, 4).item() < base);
  }
}

TEST_CASE("loss_jsd examples and bounds") {
  CHECK(loss_jsd(ad::constant(Tensor({2, 3}, 1.5))).item() == doctest::Approx(0.0).epsilon(1e-15));
  const double onehot = loss_jsd(ad::constant(Tensor({1, 2}, {60.0, -60.0}))).item();
  // M = (3/4, 1/4): 0.5 * ln(4/3) + 0.5 * 0.5 * (ln(2/3) + ln 2).
  const double hand = 0.5 * std::log(4.0 / 3.0) + 0.25 * (std::log(2.0 / 3.0) + std::log(2.0));
  CHECK(onehot == doctest::Approx(hand).epsilon(1e-10));
  CHECK(std::abs(onehot - 0.21576) < 1e-5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor z = uniform_tensor({10, 5}, seed, -50.0, 50.0);
    const Tensor per = jsd_to_uniform(ad::constant(z)).value();
    for (std::size_t r = 0; r < 10; ++r) {
      CHECK(per[r] >= 0.0);
      CHECK(per[r] <= std::log(2.0));
      CHECK(std::abs(per[r] - static_cast<double>(jsd_oracle(z.row(r)))) <= 1e-12);
    }
  }
}

TEST_CASE("losses stay finite at extreme logits") {
  const std::vector<std::int16_t> l = {0, NEG, 1, NEG};
  Tensor z({4, 3}, {50, -50, 50, -50, 50, -50, 50, 50, -50, -50, -50, 50});
  Tensor o({4, 2}, {50, -50, -50, 50, -50, 50, 50, -50});
  const auto pred = prediction(z, o);
  for (auto v : all_variants()) {
    const double s = loss_seg(pred, l, 3, LossWeights{}, VariantConfig::make(v)).item();
    CHECK(std::isfinite(s));
  }
  CHECK(std::isfinite(loss_jsd(ad::constant(z)).item()));
}

TEST_CASE("loss_seg equals the independently summed terms") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor z = uniform_tensor({20, 3}, 100 + seed, -4.0, 4.0);
    const Tensor o = uniform_tensor({20, 2}, 200 + seed, -4.0, 4.0);
    const auto labels = mixed_labels(20, 3, seed);
    const auto t = oracle_terms(z, o, labels, 3);
    LossWeights w;
    w.beta_x = 0.07;
    w.beta_d = 0.4;
    w.beta_jsd = 0.11;
    w.ood_head_beta = 0.9;
    for (auto v : all_variants()) {
      const double got = loss_seg(prediction(z, o), labels, 3, w, VariantConfig::make(v)).item();
      CHECK(std::abs(got - static_cast<double>(oracle_seg(t, w, v))) <= 1e-12);
    }
  }
}

TEST_CASE("loss_seg reductions") {
  const Tensor z = uniform_tensor({12, 3}, 1);
  const Tensor o = uniform_tensor({12, 2}, 2);
  const auto labels = mixed_labels(12, 3, 3);
  const auto pred = prediction(z, o);
  auto v = VariantConfig::make(Variant::kNFHybridLdLx);
  v.use_energy = false;
  v.use_ood_head = false;
  v.grads_to_flow = 0;
  LossWeights zero{0, 0, 0, 0};
  CHECK(loss_seg(pred, labels, 3, zero, v).item() == loss_cls(pred, labels, 3).item());

  // beta_x = 0 on a hybrid variant gives the OODHead objective.
  LossWeights w;
  w.beta_x = 0.0;
  w.ood_head_beta = w.beta_d;
  CHECK(loss_seg(pred, labels, 3, w, VariantConfig::make(Variant::kDenseHybrid)).item() ==
        doctest::Approx(loss_seg(pred, labels, 3, w, VariantConfig::make(Variant::kOODHead)).item())
            .epsilon(1e-15));
}

TEST_CASE("gradients of every loss match finite differences") {
  const auto seg = seg::init_segnet(small_seg(), 11);
  const ad::Var x = ad::constant(uniform_tensor({16, 4}, 12));
  const auto labels = mixed_labels(16, 3, 13);
  const auto params = seg.all();
  auto pred = [&] { return seg::forward(seg, x, 16, 1); };
  const std::pair<const char*, std::function<ad::Var()>> cases[] = {
      {"loss_cls", [&] { return loss_cls(pred(), labels, 3); }},
      {"loss_d", [&] { return loss_d(pred(), labels, 3).total(); }},
      {"loss_x", [&] { return loss_x(pred(), labels, 3); }},
      {"loss_jsd", [&] { return loss_jsd(pred().class_logits); }},
      {"loss_seg", [&] {
         return loss_seg(pred(), labels, 3, LossWeights{}, VariantConfig::make(Variant::kNFHybridLdLx));
       }},
  };
  for (const auto& [name, f] : cases) {
    const auto c = testing::check_gradient(f, params);
    INFO(name << " rel_error=" << c.rel_error);
    CHECK(c.rel_error <= 1e-4);
  }
  const auto f = flow::init_flow(small_flow(), 14);
  testing::randomize(f, 15, 0.4);
  const ad::Var crops = ad::constant(uniform_tensor({9, 4}, 16));
  const auto c = testing::check_gradient([&] { return loss_mle(f, crops); }, f.all());
  CHECK(c.rel_error <= 1e-4);
}

TEST_CASE("loss_flow examples") {
  flow::FlowConfig cfg = small_flow();
  cfg.dim = 2;
  const auto f = flow::zero_flow(cfg);
  const ad::Var crops = ad::constant(Tensor({5, 2}));
  CHECK(loss_mle(f, crops).item() == doctest::Approx(std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  const ad::Var logits = ad::constant(uniform_tensor({4, 3}, 1));
  LossWeights w;
  w.beta_jsd = 0.0;
  const auto v = VariantConfig::make(Variant::kNFHybridJS);
  CHECK(loss_flow(f, crops, logits, w, v).item() == loss_mle(f, crops).item());
  w.beta_jsd = 0.5;
  CHECK(loss_flow(f, crops, logits, w, v).item() ==
        doctest::Approx(loss_mle(f, crops).item() + 0.5 * loss_jsd(logits).item()).epsilon(1e-15));
  CHECK(loss_flow(f, crops, logits, w, VariantConfig::make(Variant::kNFHybridLdLx)).item() ==
        loss_mle(f, crops).item());
  CHECK_THROWS_AS(loss_mle(f, ad::constant(Tensor())), InvalidArgument);
}

TEST_CASE("route_gradients stops exactly the unrouted views") {
  const ad::Var sample = ad::parameter(uniform_tensor({4, 4}, 1));
  CHECK_THROWS_AS(route_gradients(VariantConfig::make(Variant::kOODHead), sample), InvalidArgument);
  for (auto v : all_variants()) {
    const auto c = VariantConfig::make(v);
    if (!c.uses_flow()) continue;
    for (bool mle_only : {false, true}) {
      const auto r = route_gradients(c, sample, mle_only);
      const std::pair<const ad::Var*, LossTerm> views[] = {
          {&r.for_d, kTermLd}, {&r.for_x, kTermLx}, {&r.for_flow_jsd, kTermJsd}};
      for (const auto& [view, term] : views) {
        ad::Var s = sample;
        s.zero_grad();
        ad::backward(ad::sum(*view));
        const bool live = !mle_only && c.routes(term);
        CHECK((s.grad()[0] == 1.0) == live);
      }
      ad::Var s = sample;
      s.zero_grad();
      ad::backward(ad::sum(r.for_seg_jsd) + ad::sum(r.stopped));
      CHECK(s.grad()[0] == 0.0);
    }
  }
}

TEST_CASE("gradient routing through the sampling path") {
  Fixture fx;
  for (auto variant : all_variants()) {
    const auto v = VariantConfig::make(variant);
    if (!v.uses_flow()) continue;
    const Objective o = fx.objective(v);
    struct Probe {
      const char* name;
      LossTerm term;
      ad::Var Objective::*field;
    };
    const Probe probes[] = {
        {"L_d", kTermLd, &Objective::d_out},
        {"L_x", kTermLx, &Objective::x},
        {"L_jsd", kTermJsd, o.flow_jsd.defined() ? &Objective::flow_jsd : &Objective::seg_jsd},
    };
    for (const Probe& p : probes) {
      const std::string label = std::string(variant_name(variant)) + " " + p.name;
      INFO(label);
      const double g = flow_grad_norm(fx.flow, fx.objective(v).*(p.field));
      if (v.routes(p.term)) {
        CHECK(g > 1e-6);
        const auto c = testing::check_gradient(
            [&] { return fx.objective(v).*(p.field); }, fx.flow.all());
        CHECK(c.rel_error <= 1e-4);
      } else {
        CHECK(g <= 1e-10);
        // The value still depends on the flow: the path is stopped, not absent.
        const auto n = testing::numeric_gradient([&] { return fx.objective(v).*(p.field); },
                                                 fx.flow.all());
        CHECK(testing::max_abs(n) > 1e-6);
      }
    }
    // The classifier-side JSD never trains the flow.
    CHECK(flow_grad_norm(fx.flow, fx.objective(v).seg_jsd) <= 1e-10);
    // During warm-up only L_mle reaches the flow.
    const Objective warm = fx.objective(v, true);
    CHECK_FALSE(warm.flow_jsd.defined());
    CHECK(flow_grad_norm(fx.flow, warm.seg_total) <= 1e-10);
  }
}

TEST_CASE("NF-OODHead: no segmentation loss reaches the flow") {
  Fixture fx;
  const auto v = VariantConfig::make(Variant::kNFOODHead);
  CHECK(flow_grad_norm(fx.flow, fx.objective(v).seg_total) <= 1e-10);
  const Objective o = fx.objective(v);
  const double total = flow_grad_norm(fx.flow, o.total);
  CHECK(total == doctest::Approx(flow_grad_norm(fx.flow, fx.objective(v).mle)).epsilon(1e-12));
}

TEST_CASE("NF-Hybrid-Ld: energy term is blocked while L_d flows") {
  Fixture fx;
  const auto v = VariantConfig::make(Variant::kNFHybridLd);
  CHECK(flow_grad_norm(fx.flow, fx.objective(v).x) <= 1e-10);
  CHECK(flow_grad_norm(fx.flow, fx.objective(v).d_out) > 1e-6);
}

TEST_CASE("NF-Hybrid-JS: classifier gradients ignore flow trainability") {
  Fixture fx;
  const auto v = VariantConfig::make(Variant::kNFHybridJS);
  auto seg_grads = [&](const flow::FlowParams& f) {
    const auto batch = make_batch(f, fx.bench);
    for (ad::Var p : fx.seg.all()) p.zero_grad();
    ad::backward(joint_objective(fx.seg, &f, batch, LossWeights{}, v).total);
    std::vector<Tensor> g;
    for (const ad::Var& p : fx.seg.all()) g.push_back(p.grad());
    return g;
  };
  CHECK(seg_grads(fx.flow) == seg_grads(fx.flow.frozen()));
}

TEST_CASE("joint objective input validation") {
  Fixture fx;
  const auto batch = make_batch(fx.flow, fx.bench);
  const auto v = VariantConfig::make(Variant::kNFHybridLdLx);
  CHECK_THROWS_AS(joint_objective(fx.seg, nullptr, batch, LossWeights{}, v), InvalidArgument);
  CHECK_THROWS_AS(joint_objective(fx.seg, &fx.flow, {}, LossWeights{}, v), InvalidArgument);
  auto broken = batch;
  broken[0].window.pop_back();
  CHECK_THROWS_AS(joint_objective(fx.seg, &fx.flow, broken, LossWeights{}, v), InvalidArgument);
}

TEST_CASE("joint objective terms match single-scene losses") {
  Fixture fx;
  const auto v = VariantConfig::make(Variant::kNFHybridLdLx);
  const auto batch = make_batch(fx.flow, fx.bench);
  const Objective o = joint_objective(fx.seg, &fx.flow, batch, LossWeights{}, v);
  double cls = 0, x = 0;
  for (const MixedScene& m : batch) {
    const auto pred = seg::forward(fx.seg, m.scene.feature_matrix(), m.scene.height, m.scene.width);
    cls += loss_cls(pred, m.scene.labels, 3).item() / 2.0;
    x += loss_x(pred, m.scene.labels, 3).item() / 2.0;
  }
  CHECK(o.cls.item() == doctest::Approx(cls).epsilon(1e-12));
  CHECK(o.x.item() == doctest::Approx(x).epsilon(1e-12));
  CHECK(o.total.item() == doctest::Approx(o.seg_total.item() + o.flow_total.item()).epsilon(1e-15));
}
