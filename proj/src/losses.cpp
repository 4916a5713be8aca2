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

#include "synthneg/losses.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "synthneg/error.hpp"

namespace synthneg::loss {

namespace {

constexpr double kProbFloor = 1e-12;

ad::Var zero() { return ad::constant(Tensor::scalar(0.0)); }

ad::Var mean_of(const std::vector<ad::Var>& terms) {
  ad::Var s = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) s = s + terms[i];
  return ad::scale(s, 1.0 / static_cast<double>(terms.size()));
}

std::vector<std::size_t> offset(std::span<const std::size_t> rows, std::size_t by) {
  std::vector<std::size_t> out(rows.begin(), rows.end());
  for (auto& r : out) r += by;
  return out;
}

std::vector<std::size_t> iota(std::size_t begin, std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), begin);
  return out;
}

}  // namespace

void LossWeights::validate() const {
  if (beta_x < 0.0 || beta_d < 0.0 || beta_jsd < 0.0 || ood_head_beta < 0.0) {
    throw InvalidArgument("LossWeights: all weights must be >= 0");
  }
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kDenseHybrid:
      return "DENSEHYBRID";
    case Variant::kNFlowJS:
      return "NFLOWJS";
    case Variant::kNFHybridJS:
      return "NF_HYBRID_JS";
    case Variant::kNFHybridLdLx:
      return "NF_HYBRID_LDLX";
    case Variant::kNFHybridLd:
      return "NF_HYBRID_LD";
    case Variant::kOODHead:
      return "OODHEAD";
    case Variant::kNFOODHead:
      return "NF_OODHEAD";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  std::string key;
  for (char ch : name) {
    if (ch == '-' || ch == '_' || ch == ' ') continue;
    key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  for (Variant v : all_variants()) {
    std::string candidate;
    for (const char* p = variant_name(v); *p; ++p) {
      if (*p != '_') candidate.push_back(*p);
    }
    if (candidate == key) return v;
  }
  throw InvalidArgument("unknown variant '" + name + "'");
}

std::vector<Variant> all_variants() {
  return {Variant::kDenseHybrid,  Variant::kNFlowJS,    Variant::kNFHybridJS,
          Variant::kNFHybridLdLx, Variant::kNFHybridLd, Variant::kOODHead,
          Variant::kNFOODHead};
}

VariantConfig VariantConfig::make(Variant v) {
  VariantConfig c;
  c.name = v;
  switch (v) {
    case Variant::kDenseHybrid:
      c.source = data::NegativeSourceKind::kAuxiliary;
      c.use_energy = true;
      c.use_ood_head = true;
      c.grads_to_flow = 0;
      break;
    case Variant::kNFlowJS:
      c.source = data::NegativeSourceKind::kFlow;
      c.use_energy = false;
      c.use_ood_head = false;
      c.use_jsd_in_flow_loss = true;
      c.use_jsd_in_seg_loss = true;
      c.grads_to_flow = kTermJsd;
      break;
    case Variant::kNFHybridJS:
      c.source = data::NegativeSourceKind::kFlow;
      c.use_jsd_in_flow_loss = true;
      c.grads_to_flow = kTermJsd;
      break;
    case Variant::kNFHybridLdLx:
      c.source = data::NegativeSourceKind::kFlow;
      c.grads_to_flow = kTermLd | kTermLx;
      break;
    case Variant::kNFHybridLd:
      c.source = data::NegativeSourceKind::kFlow;
      c.grads_to_flow = kTermLd;
      break;
    case Variant::kOODHead:
      c.source = data::NegativeSourceKind::kAuxiliary;
      c.use_energy = false;
      c.grads_to_flow = 0;
      break;
    case Variant::kNFOODHead:
      c.source = data::NegativeSourceKind::kFlow;
      c.use_energy = false;
      c.grads_to_flow = 0;
      break;
  }
  return c;
}

void VariantConfig::validate() const {
  const bool aux_variant = name == Variant::kDenseHybrid || name == Variant::kOODHead;
  if (aux_variant != (source == data::NegativeSourceKind::kAuxiliary)) {
    throw InvalidArgument(std::string(variant_name(name)) + ": wrong negative source");
  }
  if (source == data::NegativeSourceKind::kAuxiliary && grads_to_flow != 0) {
    throw InvalidArgument(std::string(variant_name(name)) +
                          ": cannot route gradients to a flow with auxiliary negatives");
  }
  if (routes(kTermJsd) && !use_jsd_in_flow_loss) {
    throw InvalidArgument(std::string(variant_name(name)) +
                          ": JSD routed to the flow but absent from its objective");
  }
  if (routes(kTermLx) && !use_energy) {
    throw InvalidArgument(std::string(variant_name(name)) + ": L_x routed but energy term disabled");
  }
  if (routes(kTermLd) && !use_ood_head) {
    throw InvalidArgument(std::string(variant_name(name)) + ": L_d routed but outlier head disabled");
  }
}

std::string terms_string(unsigned terms) {
  std::string out = "{";
  auto add = [&](const char* s) {
    if (out.size() > 1) out += ", ";
    out += s;
  };
  if (terms & kTermLd) add("L_d");
  if (terms & kTermLx) add("L_x");
  if (terms & kTermJsd) add("L_jsd");
  return out + "}";
}

PixelSplit split_pixels(std::span<const std::int16_t> labels, int classes) {
  PixelSplit s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (data::is_inlier_label(labels[i], classes)) {
      s.inlier.push_back(i);
      s.inlier_labels.push_back(static_cast<std::size_t>(labels[i]));
    } else if (labels[i] == data::kNegativeLabel) {
      s.negative.push_back(i);
    }
  }
  return s;
}

ad::Var cls_term(const ad::Var& class_logits, std::span<const std::size_t> labels) {
  return ad::neg(ad::mean(ad::pick(ad::log_softmax(class_logits), labels)));
}

ad::Var d_term(const ad::Var& ood_logits, std::size_t column) {
  const std::vector<std::size_t> col(ood_logits.value().rows(), column);
  return ad::neg(ad::mean(ad::pick(ad::log_softmax(ood_logits), col)));
}

ad::Var energy_term(const ad::Var& class_logits) {
  return ad::mean(ad::logsumexp(class_logits));
}

ad::Var jsd_to_uniform(const ad::Var& class_logits) {
  const double k = static_cast<double>(class_logits.value().cols());
  const ad::Var p = ad::softmax(class_logits);
  const ad::Var log_p = ad::log(ad::maximum(p, ad::constant(Tensor::scalar(kProbFloor))));
  const ad::Var log_m = ad::log(ad::add_scalar(ad::scale(p, 0.5), 0.5 / k));
  // KL(P || M) and KL(U || M), U = 1/K.
  const ad::Var kl_p = ad::sum_last(p * (log_p - log_m));
  const ad::Var kl_u =
      ad::scale(ad::sum_last(ad::add_scalar(ad::neg(log_m), -std::log(k))), 1.0 / k);
  return ad::scale(kl_p + kl_u, 0.5);
}

ad::Var loss_cls(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels,
                 int classes) {
  const PixelSplit s = split_pixels(labels, classes);
  if (s.inlier.empty()) throw InvalidArgument("loss_cls: no inlier pixels");
  return cls_term(ad::gather_rows(pred.class_logits, s.inlier), s.inlier_labels);
}

DLoss loss_d(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels,
             int classes) {
  const PixelSplit s = split_pixels(labels, classes);
  DLoss d;
  d.inlier = s.inlier.empty() ? zero()
                              : d_term(ad::gather_rows(pred.ood_logits, s.inlier), seg::kInlierColumn);
  if (s.negative.empty()) {
    spdlog::warn("loss_d: no negative pixels; negative term set to 0");
    d.negative = zero();
  } else {
    d.negative = d_term(ad::gather_rows(pred.ood_logits, s.negative), seg::kOutlierColumn);
  }
  return d;
}

ad::Var loss_x(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels,
               int classes) {
  const PixelSplit s = split_pixels(labels, classes);
  if (s.negative.empty()) {
    spdlog::warn("loss_x: no negative pixels; term set to 0");
    return zero();
  }
  return energy_term(ad::gather_rows(pred.class_logits, s.negative));
}

ad::Var loss_jsd(const ad::Var& class_logits_on_samples) {
  return ad::mean(jsd_to_uniform(class_logits_on_samples));
}

SegTerms seg_terms(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels,
                   int classes) {
  SegTerms t;
  t.cls = loss_cls(pred, labels, classes);
  const DLoss d = loss_d(pred, labels, classes);
  t.d_in = d.inlier;
  t.d_out = d.negative;
  t.x = loss_x(pred, labels, classes);
  const PixelSplit s = split_pixels(labels, classes);
  t.jsd = s.negative.empty() ? zero() : loss_jsd(ad::gather_rows(pred.class_logits, s.negative));
  return t;
}

ad::Var combine_seg(const SegTerms& t, const LossWeights& w, const VariantConfig& v) {
  w.validate();
  ad::Var total = t.cls;
  if (v.use_ood_head) {
    const double beta = v.ood_head_weighting() ? w.ood_head_beta : w.beta_d;
    total = total + t.d_in + ad::scale(t.d_out, beta);
  }
  if (v.use_energy && !v.ood_head_weighting()) total = total + ad::scale(t.x, w.beta_x);
  if (v.use_jsd_in_seg_loss) total = total + ad::scale(t.jsd, w.beta_jsd);
  return total;
}

ad::Var loss_seg(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels,
                 int classes, const LossWeights& w, const VariantConfig& v) {
  return combine_seg(seg_terms(pred, labels, classes), w, v);
}

ad::Var loss_mle(const flow::FlowParams& flow, const ad::Var& inlier_crops) {
  if (!inlier_crops.defined() || inlier_crops.value().empty()) {
    throw InvalidArgument("loss_mle: empty crop batch");
  }
  return ad::neg(ad::mean(flow::log_prob(flow, inlier_crops)));
}

ad::Var loss_flow(const flow::FlowParams& flow, const ad::Var& inlier_crops,
                  const ad::Var& class_logits_on_samples, const LossWeights& w,
                  const VariantConfig& v) {
  if (!v.uses_flow()) throw InvalidArgument("loss_flow: variant does not use flow negatives");
  ad::Var total = loss_mle(flow, inlier_crops);
  if (v.use_jsd_in_flow_loss && w.beta_jsd != 0.0) {
    total = total + ad::scale(loss_jsd(class_logits_on_samples), w.beta_jsd);
  }
  return total;
}

RoutedSample route_gradients(const VariantConfig& v, const ad::Var& sample, bool mle_only) {
  v.validate();
  if (!v.uses_flow()) {
    throw InvalidArgument("route_gradients: " + std::string(variant_name(v.name)) +
                          " uses auxiliary negatives; there is no flow to route to");
  }
  RoutedSample r;
  r.stopped = ad::stop_gradient(sample);
  auto pick = [&](LossTerm term) { return (!mle_only && v.routes(term)) ? sample : r.stopped; };
  r.for_d = pick(kTermLd);
  r.for_x = pick(kTermLx);
  r.for_flow_jsd = pick(kTermJsd);
  // The classifier's own JSD term trains the classifier only.
  r.for_seg_jsd = r.stopped;
  return r;
}

Objective joint_objective(const seg::SegNetParams& seg, const flow::FlowParams* flow,
                          std::span<const MixedScene> batch, const LossWeights& w,
                          const VariantConfig& v, bool mle_only) {
  v.validate();
  w.validate();
  if (batch.empty()) throw InvalidArgument("joint_objective: empty batch");
  const bool use_flow = v.uses_flow();
  if (use_flow && flow == nullptr) throw InvalidArgument("joint_objective: variant needs a flow");
  const int classes = seg.config.classes;
  const std::size_t n = batch.size();

  std::vector<RoutedSample> routed(n);
  bool live_main = false;
  if (use_flow) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!batch[i].flow_patch.defined()) {
        throw InvalidArgument("joint_objective: flow variant needs a flow patch per scene");
      }
      routed[i] = route_gradients(v, batch[i].flow_patch, mle_only);
    }
    live_main = !mle_only && (v.routes(kTermLd) || v.routes(kTermLx));
  }

  // Main forward over every mixed scene. When any term routes to the flow the
  // live sample is scattered into the scene, otherwise the scene is constant.
  std::vector<ad::Var> inputs;
  std::vector<std::size_t> offsets;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const MixedScene& m = batch[i];
    ad::Var base = ad::constant(m.scene.feature_matrix());
    if (live_main) base = ad::scatter_rows(base, m.window, m.flow_patch);
    inputs.push_back(base);
    offsets.push_back(rows);
    rows += m.scene.pixels();
  }
  const seg::PixelPrediction main =
      seg::forward(seg, ad::concat_rows(inputs), static_cast<int>(rows), 1);

  // Negative pixels seen through a stopped sample, for terms that must not
  // reach the flow while the main forward is live.
  seg::PixelPrediction stopped_pred;
  std::vector<std::size_t> stopped_offsets;
  const bool need_stopped =
      live_main && (!v.routes(kTermLd) || !v.routes(kTermLx) || v.use_jsd_in_seg_loss);
  if (need_stopped) {
    std::vector<ad::Var> parts;
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
      parts.push_back(routed[i].stopped);
      stopped_offsets.push_back(r);
      r += batch[i].window.size();
    }
    stopped_pred = seg::forward(seg, ad::concat_rows(parts), static_cast<int>(r), 1);
  }

  auto neg_rows = [&](std::size_t i, bool live) -> std::pair<const seg::PixelPrediction*,
                                                              std::vector<std::size_t>> {
    if (live || !need_stopped) return {&main, offset(batch[i].window, offsets[i])};
    return {&stopped_pred, iota(stopped_offsets[i], batch[i].window.size())};
  };

  std::vector<ad::Var> cls, d_in, d_out, x, sjsd;
  for (std::size_t i = 0; i < n; ++i) {
    const MixedScene& m = batch[i];
    const PixelSplit s = split_pixels(m.scene.labels, classes);
    if (s.inlier.empty()) throw InvalidArgument("joint_objective: scene without inlier pixels");
    if (s.negative.size() != m.window.size()) {
      throw InvalidArgument("joint_objective: negative labels disagree with the pasted window");
    }
    const auto in_rows = offset(s.inlier, offsets[i]);
    cls.push_back(cls_term(ad::gather_rows(main.class_logits, in_rows), s.inlier_labels));
    d_in.push_back(d_term(ad::gather_rows(main.ood_logits, in_rows), seg::kInlierColumn));
    if (m.window.empty()) {
      d_out.push_back(zero());
      x.push_back(zero());
      sjsd.push_back(zero());
      continue;
    }
    {
      auto [pred, r] = neg_rows(i, live_main && v.routes(kTermLd));
      d_out.push_back(d_term(ad::gather_rows(pred->ood_logits, r), seg::kOutlierColumn));
    }
    {
      auto [pred, r] = neg_rows(i, live_main && v.routes(kTermLx));
      x.push_back(energy_term(ad::gather_rows(pred->class_logits, r)));
    }
    {
      // Diagnostic only unless the classifier trains on it; never reaches the flow.
      auto [pred, r] = neg_rows(i, false);
      ad::Var j = loss_jsd(ad::gather_rows(pred->class_logits, r));
      sjsd.push_back(v.use_jsd_in_seg_loss ? j : ad::stop_gradient(j));
    }
  }

  Objective o;
  o.cls = mean_of(cls);
  o.d_in = mean_of(d_in);
  o.d_out = mean_of(d_out);
  o.x = mean_of(x);
  o.seg_jsd = mean_of(sjsd);
  o.seg_total = combine_seg(SegTerms{o.cls, o.d_in, o.d_out, o.x, o.seg_jsd}, w, v);
  o.total = o.seg_total;

  if (use_flow) {
    std::vector<ad::Var> crops;
    for (const MixedScene& m : batch) {
      if (m.inlier_crop.empty()) throw InvalidArgument("joint_objective: missing inlier crop");
      crops.push_back(ad::constant(m.inlier_crop));
    }
    o.mle = loss_mle(*flow, ad::concat_rows(crops));
    o.flow_total = o.mle;
    if (v.use_jsd_in_flow_loss && !mle_only) {
      std::vector<ad::Var> jsd;
      for (std::size_t i = 0; i < n; ++i) {
        const ad::Var& s = routed[i].for_flow_jsd;
        const auto p = seg::forward(seg, s, static_cast<int>(s.value().rows()), 1, true);
        jsd.push_back(loss_jsd(p.class_logits));
      }
      o.flow_jsd = mean_of(jsd);
      o.flow_total = o.flow_total + ad::scale(o.flow_jsd, w.beta_jsd);
    }
    o.total = o.seg_total + o.flow_total;
  }
  return o;
}

ad::Var classification_objective(const seg::SegNetParams& seg, std::span<const data::Scene> batch) {
  if (batch.empty()) throw InvalidArgument("classification_objective: empty batch");
  std::vector<ad::Var> inputs;
  std::vector<std::size_t> offsets;
  std::size_t rows = 0;
  for (const data::Scene& s : batch) {
    inputs.push_back(ad::constant(s.feature_matrix()));
    offsets.push_back(rows);
    rows += s.pixels();
  }
  const auto pred = seg::forward(seg, ad::concat_rows(inputs), static_cast<int>(rows), 1);
  std::vector<ad::Var> terms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PixelSplit s = split_pixels(batch[i].labels, seg.config.classes);
    if (s.inlier.empty()) throw InvalidArgument("classification_objective: scene without inliers");
    terms.push_back(
        cls_term(ad::gather_rows(pred.class_logits, offset(s.inlier, offsets[i])), s.inlier_labels));
  }
  return mean_of(terms);
}

}  // namespace synthneg::loss
