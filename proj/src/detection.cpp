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

#include "tln/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "box_math.hpp"

namespace tln {

Box box_from_center(float cx, float cy, float w, float h) {
  return {cx - 0.5f * w, cy - 0.5f * h, cx + 0.5f * w, cy + 0.5f * h};
}

double box_iou(const Box& a, const Box& b, IouVariant variant) {
  const detail::BoxT<double> da{a.x1, a.y1, a.x2, a.y2}, db{b.x1, b.y1, b.x2, b.y2};
  return detail::iou_impl(da, db, variant == IouVariant::kCiou);
}

// ------------------------------------------------------------------ anchors

namespace {

double centered_iou(const std::pair<float, float>& a, const std::pair<float, float>& b) {
  const double inter = std::min<double>(a.first, b.first) * std::min<double>(a.second, b.second);
  return inter / (double(a.first) * a.second + double(b.first) * b.second - inter);
}

}  // namespace

std::vector<std::pair<float, float>> kmeans_anchors(const std::vector<std::pair<float, float>>& wh, int k,
                                                    uint64_t seed, int max_iterations) {
  if (wh.empty()) throw ParameterError("auto_anchor: empty box list");
  if (k < 1) throw ParameterError("auto_anchor: k must be positive");
  for (const auto& [w, h] : wh)
    if (!(w > 0.f) || !(h > 0.f)) throw ParameterError("auto_anchor: box dimensions must be positive");
  auto distinct = wh;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<size_t>(k) > distinct.size())
    throw ParameterError("auto_anchor: k exceeds the number of distinct boxes");

  // Seeded first center, then repeatedly the box farthest from all centers.
  std::mt19937_64 rng(seed);
  std::vector<std::pair<float, float>> centers{wh[std::uniform_int_distribution<size_t>(0, wh.size() - 1)(rng)]};
  std::vector<double> nearest(wh.size(), 2.0);
  while (centers.size() < static_cast<size_t>(k)) {
    size_t best = 0;
    for (size_t i = 0; i < wh.size(); ++i) {
      nearest[i] = std::min(nearest[i], 1.0 - centered_iou(wh[i], centers.back()));
      if (nearest[i] > nearest[best]) best = i;
    }
    centers.push_back(wh[best]);
  }

  std::vector<int> assign(wh.size(), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (size_t i = 0; i < wh.size(); ++i) {
      int arg = 0;
      double best = -1.0;
      for (int c = 0; c < k; ++c) {
        const double iou = centered_iou(wh[i], centers[c]);
        if (iou > best) best = iou, arg = c;
      }
      changed |= assign[i] != arg;
      assign[i] = arg;
    }
    if (!changed) break;
    std::vector<double> sw(k, 0.0), sh(k, 0.0);
    std::vector<int64_t> count(k, 0);
    for (size_t i = 0; i < wh.size(); ++i) {
      sw[assign[i]] += wh[i].first, sh[assign[i]] += wh[i].second, ++count[assign[i]];
    }
    for (int c = 0; c < k; ++c)
      if (count[c] > 0) centers[c] = {static_cast<float>(sw[c] / count[c]), static_cast<float>(sh[c] / count[c])};
  }
  std::stable_sort(centers.begin(), centers.end(), [](const auto& a, const auto& b) {
    return double(a.first) * a.second < double(b.first) * b.second;
  });
  return centers;
}

AnchorSet auto_anchor(const std::vector<std::pair<float, float>>& wh, uint64_t seed) {
  const auto c = kmeans_anchors(wh, 9, seed);
  AnchorSet a;
  for (int g = 0; g < 3; ++g)
    for (int j = 0; j < 3; ++j) a.groups[g][j] = c[3 * g + j];
  return a;
}

// --------------------------------------------------------------- assignment

TargetMap assign_targets(const std::vector<std::vector<GtBox>>& gt, const AnchorSet& anchors,
                         const std::array<std::pair<int64_t, int64_t>, 3>& grids) {
  TargetMap t;
  t.grids = grids;
  t.batch = static_cast<int64_t>(gt.size());
  if (t.batch == 0) throw ParameterError("assign_targets: empty batch");
  for (int s = 0; s < 3; ++s)
    t.objectness[s] = Tensor<float>(Shape{t.batch, kAnchorsPerCell, grids[s].first, grids[s].second});
  const float img_h = static_cast<float>(grids[0].first * AnchorSet::kStrides[0]);
  const float img_w = static_cast<float>(grids[0].second * AnchorSet::kStrides[0]);

  for (int64_t n = 0; n < t.batch; ++n) {
    for (const GtBox& g : gt[n]) {
      Box b{std::clamp(g.box.x1, 0.f, img_w), std::clamp(g.box.y1, 0.f, img_h), std::clamp(g.box.x2, 0.f, img_w),
            std::clamp(g.box.y2, 0.f, img_h)};
      if (!(b == g.box)) t.clipped = true;
      const float w = b.width(), h = b.height();
      if (!(w > 0.f) || !(h > 0.f)) continue;
      const float cx = 0.5f * (b.x1 + b.x2), cy = 0.5f * (b.y1 + b.y2);
      for (int s = 0; s < 3; ++s) {
        const auto [gh, gw] = grids[s];
        const float stride = static_cast<float>(AnchorSet::kStrides[s]);
        const float fx = cx / stride, fy = cy / stride;
        const int64_t ix = std::min<int64_t>(static_cast<int64_t>(fx), gw - 1);
        const int64_t iy = std::min<int64_t>(static_cast<int64_t>(fy), gh - 1);
        const int64_t nx = fx - static_cast<float>(ix) < 0.5f ? ix - 1 : ix + 1;
        const int64_t ny = fy - static_cast<float>(iy) < 0.5f ? iy - 1 : iy + 1;
        std::vector<std::pair<int64_t, int64_t>> cells{{iy, ix}};
        if (nx >= 0 && nx < gw) cells.emplace_back(iy, nx);
        if (ny >= 0 && ny < gh) cells.emplace_back(ny, ix);
        for (int a = 0; a < kAnchorsPerCell; ++a) {
          const auto [aw, ah] = anchors.groups[s][a];
          const float ratio = std::max({w / aw, aw / w, h / ah, ah / h});
          if (!(ratio < kAnchorRatioLimit)) continue;
          for (const auto& [y, x] : cells) {
            t.positives.push_back({s, a, n, y, x, b, g.class_id});
            t.objectness[s].data()[((n * kAnchorsPerCell + a) * gh + y) * gw + x] = 1.f;
          }
        }
      }
    }
  }
  return t;
}

// ------------------------------------------------------------------- decode

std::vector<Detection> decode(const std::array<Tensor<float>, 3>& det_raw, int64_t n, const AnchorSet& anchors,
                              float conf_threshold) {
  std::vector<Detection> out;
  for (int s = 0; s < 3; ++s) {
    const Tensor<float>& r = det_raw[s];
    if (r.rank() != 4 || r.dim(1) != kDetChannels || n < 0 || n >= r.dim(0))
      throw ParameterError("decode: expected raw head output (N,18,h,w)");
    const int64_t gh = r.dim(2), gw = r.dim(3), plane = gh * gw;
    const double stride = static_cast<double>(AnchorSet::kStrides[s]);
    const float* base = r.data() + n * kDetChannels * plane;
    for (int a = 0; a < kAnchorsPerCell; ++a) {
      const float* ch = base + a * kSlotChannels * plane;
      for (int64_t y = 0; y < gh; ++y)
        for (int64_t x = 0; x < gw; ++x) {
          const int64_t i = y * gw + x;
          const double conf = detail::sigmoid(ch[4 * plane + i]) * detail::sigmoid(ch[5 * plane + i]);
          if (!(conf >= conf_threshold)) continue;
          const double cx = (2.0 * detail::sigmoid(ch[i]) - 0.5 + x) * stride;
          const double cy = (2.0 * detail::sigmoid(ch[plane + i]) - 0.5 + y) * stride;
          const double sw = 2.0 * detail::sigmoid(ch[2 * plane + i]), sh = 2.0 * detail::sigmoid(ch[3 * plane + i]);
          const double w = sw * sw * anchors.groups[s][a].first, h = sh * sh * anchors.groups[s][a].second;
          out.push_back({box_from_center(static_cast<float>(cx), static_cast<float>(cy), static_cast<float>(w),
                                         static_cast<float>(h)),
                         static_cast<float>(conf), 0});
        }
    }
  }
  return out;
}

// ---------------------------------------------------------------------- nms

std::vector<Detection> nms(const std::vector<Detection>& dets, float iou_threshold) {
  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return dets[a].confidence > dets[b].confidence; });
  std::vector<Detection> kept;
  for (size_t i : order) {
    bool keep = true;
    for (const Detection& k : kept)
      if (box_iou(dets[i].box, k.box) >= iou_threshold) {
        keep = false;
        break;
      }
    if (keep) kept.push_back(dets[i]);
  }
  return kept;
}

std::string format_detection(const Detection& d) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f %.6f", d.class_id, d.confidence, d.box.x1, d.box.y1, d.box.x2,
                d.box.y2);
  return buf;
}

}  // namespace tln
