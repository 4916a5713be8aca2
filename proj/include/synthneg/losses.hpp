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

// Training objectives for the segmentation model and the flow, and the
// per-variant routing that decides which segmentation terms may push
// gradient back into the flow through its samples.
//
// Segmentation objective, per scene:
//
//   L_seg = L_cls + L_d_in + beta_d * L_d_out + beta_x * L_x
//
//   L_cls   = mean over inlier pixels of -ln P(y | x)
//   L_d_in  = mean over inlier pixels of -ln P(d_in | x)
//   L_d_out = mean over negative pixels of -ln P(d_out | x)
//   L_x     = mean over negative pixels of ln p̂(x),  ln p̂ = logsumexp(logits)
//
// Flow objective: L_flow = L_mle + beta_jsd * L_jsd with L_mle the mean
// negative log-likelihood of inlier crops and L_jsd the mean JS divergence
// between the classifier posterior on flow samples and the uniform
// distribution (classifier held fixed).

#ifndef SYNTHNEG_LOSSES_HPP_
#define SYNTHNEG_LOSSES_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "synthneg/autodiff.hpp"
#include "synthneg/flow.hpp"
#include "synthneg/segnet.hpp"
#include "synthneg/toydata.hpp"

namespace synthneg::loss {

struct LossWeights {
  double beta_x = 0.03;
  double beta_d = 0.3;
  double beta_jsd = 0.03;
  double ood_head_beta = 1.0;

  void validate() const;
};

enum class Variant {
  kDenseHybrid,
  kNFlowJS,
  kNFHybridJS,
  kNFHybridLdLx,
  kNFHybridLd,
  kOODHead,
  kNFOODHead,
};

const char* variant_name(Variant v);
// Accepts "NF_HYBRID_LDLX", "nf-hybrid-ldlx", "NF-Hybrid-LdLx", ...
Variant parse_variant(const std::string& name);
std::vector<Variant> all_variants();

enum LossTerm : unsigned {
  kTermLd = 1u << 0,
  kTermLx = 1u << 1,
  kTermJsd = 1u << 2,
};

struct VariantConfig {
  Variant name = Variant::kNFHybridLdLx;
  data::NegativeSourceKind source = data::NegativeSourceKind::kFlow;
  bool use_energy = true;
  bool use_ood_head = true;
  bool use_jsd_in_flow_loss = false;
  bool use_jsd_in_seg_loss = false;
  unsigned grads_to_flow = 0;

  static VariantConfig make(Variant v);

  bool routes(LossTerm term) const { return (grads_to_flow & term) != 0; }
  bool uses_flow() const { return source == data::NegativeSourceKind::kFlow; }
  // OODHead-style variants weight the negative d-term with ood_head_beta.
  bool ood_head_weighting() const {
    return name == Variant::kOODHead || name == Variant::kNFOODHead;
  }
  void validate() const;
};

std::string terms_string(unsigned terms);

// Pixel populations of a label map.
struct PixelSplit {
  std::vector<std::size_t> inlier;
  std::vector<std::size_t> inlier_labels;  // class of each inlier pixel
  std::vector<std::size_t> negative;
};
PixelSplit split_pixels(std::span<const std::int16_t> labels, int classes);

// Row-set building blocks; each returns a scalar mean over the given rows.
ad::Var cls_term(const ad::Var& class_logits, std::span<const std::size_t> labels);
ad::Var d_term(const ad::Var& ood_logits, std::size_t column);
ad::Var energy_term(const ad::Var& class_logits);
// N x 1 JS divergence between softmax(logits) and the uniform distribution.
ad::Var jsd_to_uniform(const ad::Var& class_logits);

// Per-operation losses on a full prediction. Negative-pixel terms evaluate to
// a constant 0 (with a warning) when the label map has no negative pixels.
ad::Var loss_cls(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels,
                 int classes);
struct DLoss {
  ad::Var inlier;
  ad::Var negative;
  ad::Var total() const { return inlier + negative; }
};
DLoss loss_d(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels, int classes);
ad::Var loss_x(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels, int classes);
ad::Var loss_jsd(const ad::Var& class_logits_on_samples);

struct SegTerms {
  ad::Var cls;
  ad::Var d_in;
  ad::Var d_out;
  ad::Var x;
  ad::Var jsd;  // NFlowJS: classifier pushed towards uniform on negatives
};
SegTerms seg_terms(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels,
                   int classes);
ad::Var combine_seg(const SegTerms& terms, const LossWeights& w, const VariantConfig& v);
ad::Var loss_seg(const seg::PixelPrediction& pred, std::span<const std::int16_t> labels,
                 int classes, const LossWeights& w, const VariantConfig& v);

ad::Var loss_mle(const flow::FlowParams& flow, const ad::Var& inlier_crops);
// class_logits_on_samples must come from a forward with detached classifier
// parameters so that only the flow sees this gradient.
ad::Var loss_flow(const flow::FlowParams& flow, const ad::Var& inlier_crops,
                  const ad::Var& class_logits_on_samples, const LossWeights& w,
                  const VariantConfig& v);

// Views of one flow sample, one per consumer. Consumers whose term is not in
// grads_to_flow receive stop_gradient(sample).
struct RoutedSample {
  ad::Var for_d;
  ad::Var for_x;
  ad::Var for_flow_jsd;
  ad::Var for_seg_jsd;
  ad::Var stopped;
};
RoutedSample route_gradients(const VariantConfig& v, const ad::Var& sample, bool mle_only = false);

// One phase-2 training scene: the augmented crop with one negative window.
struct MixedScene {
  data::Scene scene;                // window pixels labelled negative, holding the pasted values
  std::vector<std::size_t> window;  // flat pixel indices of the pasted window, row-major
  ad::Var flow_patch;               // live flow sample (window.size() x D); undefined for auxiliary
  Tensor inlier_crop;               // crop for L_mle; empty for auxiliary negatives
};

struct Objective {
  ad::Var cls, d_in, d_out, x, seg_jsd;  // batch means of the segmentation terms
  ad::Var mle, flow_jsd;                 // flow terms (undefined without a flow)
  ad::Var seg_total;
  ad::Var flow_total;
  ad::Var total;
};

// Full phase-2 objective for a batch, with routing applied. Segmentation
// terms are computed per scene and averaged over the batch. `mle_only`
// restricts the flow to L_mle and stops every routed path (flow warm-up).
Objective joint_objective(const seg::SegNetParams& seg, const flow::FlowParams* flow,
                          std::span<const MixedScene> batch, const LossWeights& w,
                          const VariantConfig& v, bool mle_only = false);

// Phase-1 objective: batch mean of L_cls.
ad::Var classification_objective(const seg::SegNetParams& seg, std::span<const data::Scene> batch);

}  // namespace synthneg::loss

#endif  // SYNTHNEG_LOSSES_HPP_
