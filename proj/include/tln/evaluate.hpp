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

#include <functional>
#include <vector>

#include "tln/context.hpp"
#include "tln/data.hpp"
#include "tln/metrics.hpp"
#include "tln/model.hpp"

namespace tln {

struct EvalOptions {
  int lane_width = kValLaneWidth;
  float conf_threshold = kEvalConfThreshold;
  float nms_iou = kNmsIou;
  /// Installs hooks on the eval context before each forward pass.
  std::function<void(Ctx&)> configure;
  /// Applied to each preprocessed image batch before the forward pass.
  std::function<Tensor<float>(const Tensor<float>&)> input_transform;
  /// Keep per-image segmentation argmax maps.
  bool keep_labels = false;
};

struct EvalRun {
  EvalReport report;
  Confusion da, ll;
  std::vector<std::vector<Detection>> detections;
  std::vector<std::vector<uint8_t>> da_labels, ll_labels;
};

/// argmax over the two channels of image n of (N,2,H,W) logits; ties go to 0.
std::vector<uint8_t> argmax_labels(const Tensor<float>& logits, int64_t n);

/// Eval-mode pass over `samples`, one image at a time.
EvalRun evaluate(const Model& model, const std::vector<Sample>& samples, const EvalOptions& options = {});

}  // namespace tln
