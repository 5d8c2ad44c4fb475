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

#include "tln/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace tln {

DetectionScore eval_detection(const std::vector<std::vector<Detection>>& preds,
                              const std::vector<std::vector<GtBox>>& gts, double iou_threshold) {
  if (preds.size() != gts.size()) throw ParameterError("eval_detection: prediction and gt image counts differ");
  std::vector<std::pair<float, bool>> scored;  // (confidence, true positive)
  int64_t total_gt = 0;
  for (size_t img = 0; img < preds.size(); ++img) {
    const auto& p = preds[img];
    const auto& g = gts[img];
    total_gt += static_cast<int64_t>(g.size());
    std::vector<size_t> order(p.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return p[a].confidence > p[b].confidence; });
    std::vector<bool> taken(g.size(), false);
    for (size_t i : order) {
      double best = iou_threshold;
      int match = -1;
      for (size_t j = 0; j < g.size(); ++j) {
        if (taken[j] || g[j].class_id != p[i].class_id) continue;
        const double iou = box_iou(p[i].box, g[j].box);
        if (iou >= best && (match < 0 || iou > best)) best = iou, match = static_cast<int>(j);
      }
      if (match >= 0) taken[match] = true;
      scored.emplace_back(p[i].confidence, match >= 0);
    }
  }
  DetectionScore s;
  if (total_gt == 0) return s;
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  // Operating points at each distinct confidence.
  std::vector<double> recall, precision;
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < scored.size(); ++i) {
    (scored[i].second ? tp : fp) += 1;
    if (i + 1 < scored.size() && scored[i + 1].first == scored[i].first) continue;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  double best_f1 = -1;
  for (size_t i = 0; i < recall.size(); ++i) {
    const double f1 = recall[i] + precision[i] > 0 ? 2 * recall[i] * precision[i] / (recall[i] + precision[i]) : 0;
    if (f1 > best_f1) best_f1 = f1, s.recall = recall[i];
  }
  for (size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double prev_r = 0;
  for (size_t i = 0; i < recall.size(); ++i) {
    s.map50 += (recall[i] - prev_r) * precision[i];
    prev_r = recall[i];
  }
  return s;
}

namespace {

double ratio(int64_t num, int64_t den) { return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

// An absent class (empty union) counts as perfectly segmented.
double Confusion::foreground_iou() const { return ratio(tp, tp + fp + fn); }
double Confusion::background_iou() const { return ratio(tn, tn + fp + fn); }
double Confusion::balanced_accuracy() const { return 0.5 * (ratio(tp, tp + fn) + ratio(tn, tn + fp)); }

Confusion confusion(const Tensor<float>& logits, const Tensor<float>& mask) {
  if (logits.rank() != 4 || logits.dim(1) != 2 || mask.rank() != 4 || mask.dim(1) != 1 || mask.dim(0) != logits.dim(0) ||
      mask.dim(2) != logits.dim(2) || mask.dim(3) != logits.dim(3))
    throw ParameterError("confusion: expected logits (N,2,H,W) and mask (N,1,H,W)");
  const int64_t n = logits.dim(0), plane = logits.dim(2) * logits.dim(3);
  Confusion c;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t q = 0; q < plane; ++q) {
      const bool pred = logits[(i * 2 + 1) * plane + q] > logits[i * 2 * plane + q];
      const bool truth = mask[i * plane + q] > 0.5f;
      if (pred && truth) ++c.tp;
      else if (pred) ++c.fp;
      else if (truth) ++c.fn;
      else ++c.tn;
    }
  return c;
}

Confusion confusion_from_labels(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& truth) {
  if (pred.size() != truth.size()) throw ParameterError("confusion: label counts differ");
  Confusion c;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) ++c.tp;
    else if (pred[i]) ++c.fp;
    else if (truth[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::string EvalReport::key_values() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "recall=%.6f\nmap50=%.6f\nda_miou=%.6f\nll_acc=%.6f\nll_iou=%.6f\n", recall, map50,
                da_miou, ll_acc, ll_iou);
  return buf;
}

std::string EvalReport::csv_header() { return "recall,map50,da_miou,ll_acc,ll_iou"; }

std::string EvalReport::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f", recall, map50, da_miou, ll_acc, ll_iou);
  return buf;
}

}  // namespace tln
