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
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tln/anchors.hpp"
#include "tln/blocks.hpp"
#include "tln/tensor.hpp"

namespace tln {

/// Corner-form box in input pixels.
struct Box {
  float x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  float width() const { return x2 - x1; }
  float height() const { return y2 - y1; }
  bool operator==(const Box&) const = default;
};

Box box_from_center(float cx, float cy, float w, float h);

struct Detection {
  Box box;
  float confidence = 0;
  int class_id = 0;
};

/// Ground-truth object in input pixels.
struct GtBox {
  int class_id = 0;
  Box box;
};

enum class IouVariant { kIou, kCiou };

/// Zero-area boxes overlap nothing.
double box_iou(const Box& a, const Box& b, IouVariant variant = IouVariant::kIou);

/// k-means over (w, h) with distance 1 - IoU of center-aligned boxes.
/// Returns k centers sorted by ascending area.
std::vector<std::pair<float, float>> kmeans_anchors(const std::vector<std::pair<float, float>>& wh, int k,
                                                    uint64_t seed, int max_iterations = 300);

/// Nine clustered anchors split 3/3/3 by size onto strides 8/16/32.
AnchorSet auto_anchor(const std::vector<std::pair<float, float>>& wh, uint64_t seed);

/// Width/height ratio bound for anchor matching.
inline constexpr float kAnchorRatioLimit = 4.0f;

struct Positive {
  int scale = 0;
  int anchor = 0;  // slot within the scale, 0..2
  int64_t batch = 0;
  int64_t gy = 0, gx = 0;
  Box target;
  int class_id = 0;
};

struct TargetMap {
  std::array<std::pair<int64_t, int64_t>, 3> grids{};  // (h, w) per scale
  int64_t batch = 0;
  std::vector<Positive> positives;
  /// Objectness targets per scale, (N, 3, h, w), entries in {0, 1}.
  std::array<Tensor<float>, 3> objectness;
  /// Set when some ground truth had to be clipped to the image.
  bool clipped = false;
};

/// Each gt is matched to every anchor whose side ratios stay below
/// kAnchorRatioLimit, at the cell holding its center plus the nearest
/// horizontal and vertical neighbor cells.
TargetMap assign_targets(const std::vector<std::vector<GtBox>>& gt, const AnchorSet& anchors,
                         const std::array<std::pair<int64_t, int64_t>, 3>& grids);

/// Raw head channels per anchor slot: tx, ty, tw, th, obj, cls.
inline constexpr int kSlotChannels = 6;

/// Decodes one image of raw head outputs (three tensors shaped (N, 18, h, w),
/// image `n`) and keeps detections with confidence >= threshold.
std::vector<Detection> decode(const std::array<Tensor<float>, 3>& det_raw, int64_t n, const AnchorSet& anchors,
                              float conf_threshold);

/// Greedy suppression in descending confidence, ties by input order.
std::vector<Detection> nms(const std::vector<Detection>& dets, float iou_threshold);

inline constexpr float kEvalConfThreshold = 0.001f;
inline constexpr float kInferConfThreshold = 0.25f;
inline constexpr float kNmsIou = 0.45f;

/// "class_id confidence x1 y1 x2 y2" with six decimals.
std::string format_detection(const Detection& d);

}  // namespace tln
