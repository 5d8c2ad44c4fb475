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

#include <cstdint>
#include <string>
#include <vector>

#include "tln/detection.hpp"

namespace tln {

struct DetectionScore {
  double recall = 0;
  double map50 = 0;
};

/// Per image, predictions in descending confidence each claim the
/// highest-IoU unmatched gt of the same class at IoU >= threshold. Pooled
/// over images, AP is the all-point area under the precision envelope with
/// one operating point per distinct confidence; recall is taken at the point
/// of maximum F1.
DetectionScore eval_detection(const std::vector<std::vector<Detection>>& preds,
                              const std::vector<std::vector<GtBox>>& gts, double iou_threshold = 0.5);

/// Binary pixel counts with class 1 as foreground.
struct Confusion {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp, fp += o.fp, fn += o.fn, tn += o.tn;
    return *this;
  }
  bool operator==(const Confusion&) const = default;

  double foreground_iou() const;
  double background_iou() const;
  double mean_iou() const { return 0.5 * (foreground_iou() + background_iou()); }
  /// (TPR + TNR) / 2.
  double balanced_accuracy() const;
};

/// Counts of argmax(logits) (N,2,H,W) against a 0/1 mask (N,1,H,W); ties go
/// to background.
Confusion confusion(const Tensor<float>& logits, const Tensor<float>& mask);
Confusion confusion_from_labels(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& truth);

struct EvalReport {
  double recall = 0, map50 = 0, da_miou = 0, ll_acc = 0, ll_iou = 0;

  std::string key_values() const;
  static std::string csv_header();
  std::string csv_row() const;
};

}  // namespace tln
