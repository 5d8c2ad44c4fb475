/* Copyright 2026 The TriLiteNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <array>
#include <string>

#include "tln/autograd.hpp"
#include "tln/detection.hpp"

namespace tln {

struct TverskyWeights {
  double alpha = 0.7, beta = 0.3;
};

struct LossWeights {
  double cls = 0.5, obj = 1.0, reg = 0.05;
  double det = 1.0, da = 0.3, ll = 0.3;
  double focal_alpha = 0.25, focal_gamma = 2.0;
  TverskyWeights tversky_da{0.7, 0.3};
  TverskyWeights tversky_ll{0.9, 0.1};
  double tversky_smooth = 1.0;
  void validate() const;
};

struct LossReport {
  double cls = 0, obj = 0, reg = 0, det = 0;
  double focal_da = 0, tversky_da = 0, da = 0;
  double focal_ll = 0, tversky_ll = 0, ll = 0;
  double total = 0;

  /// Recomputes det, da, ll and total from the seven terms.
  void combine(const LossWeights& w);
  /// One "name step value" line per term.
  std::string format(int64_t step) const;
};

inline double detection_weighted(double cls, double obj, double reg, const LossWeights& w = {}) {
  return w.cls * cls + w.obj * obj + w.reg * reg;
}
inline double total_weighted(double det, double da, double ll, const LossWeights& w = {}) {
  return w.det * det + w.da * da + w.ll * ll;
}

/// Stable binary cross-entropy on a logit.
double bce_with_logit(double logit, double target);

/// Mean over pixels of -alpha (1 - p_t)^gamma log(p_t).
///   probs: (N,C,H,W) class probabilities; target: (N,1,H,W) class indices.
/// p_t is clamped below at 1e-12.
template <class T>
Var<T> focal_loss(const Var<T>& probs, const Tensor<T>& target, double alpha, double gamma);

/// 1 - (TP + s) / (TP + alpha FN + beta FP + s) over the whole batch, with
/// foreground probability taken from channel 1 of probs (N,2,H,W) and a
/// binary target (N,1,H,W).
template <class T>
Var<T> tversky_loss(const Var<T>& probs, const Tensor<T>& target, double alpha, double beta, double smooth);

/// Unweighted detection terms, shape (3): class BCE over positives,
/// objectness BCE over every anchor slot of every cell, mean (1 - CIoU) over
/// positives. Class and box terms are 0 without positives.
template <class T>
Var<T> detection_terms(const std::array<Var<T>, 3>& det_raw, const TargetMap& targets, const AnchorSet& anchors);

template <class T>
struct LossOutput {
  Var<T> total;
  LossReport report;
};

/// Weighted sum of the detection, drivable-area and lane-line losses. Each
/// segmentation loss is focal + Tversky on the softmax of its logits.
template <class T>
LossOutput<T> total_loss(const std::array<Var<T>, 3>& det_raw, const Var<T>& da_logits, const Var<T>& ll_logits,
                         const TargetMap& targets, const AnchorSet& anchors, const Tensor<T>& da_mask,
                         const Tensor<T>& ll_mask, const LossWeights& w = {});

}  // namespace tln
