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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "tln/detection.hpp"

namespace {

using namespace tln;

double logit(double p) { return std::log(p / (1.0 - p)); }

Box random_box(std::mt19937_64& rng, float extent = 100.f) {
  std::uniform_real_distribution<float> pos(0.f, extent), size(0.5f, extent / 3);
  const float x = pos(rng), y = pos(rng);
  return {x, y, x + size(rng), y + size(rng)};
}

TEST(BoxIou, Examples) {
  const Box a{0, 0, 2, 2}, b{1, 1, 3, 3}, far{10, 10, 12, 12};
  EXPECT_DOUBLE_EQ(box_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(box_iou(a, a, IouVariant::kCiou), 1.0);
  EXPECT_NEAR(box_iou(a, b), 1.0 / 7.0, 1e-12);
  EXPECT_EQ(box_iou(a, far), 0.0);
  EXPECT_LT(box_iou(a, far, IouVariant::kCiou), 0.0);
  EXPECT_EQ(box_iou(a, Box{1, 1, 1, 3}), 0.0);
}

TEST(BoxIou, CiouMatchesDirectFormula) {
  // Same centers' offset and different aspect: iou - rho^2/c^2 - alpha v.
  const Box a{0, 0, 4, 2}, b{1, 0, 3, 4};
  const double iou = 4.0 / (8 + 8 - 4);
  const double rho2 = 0 + 1.0, c2 = 16 + 16;
  const double v = 4 / (M_PI * M_PI) * std::pow(std::atan(2.0 / 4.0) - std::atan(4.0 / 2.0), 2);
  const double alpha = v / (1 - iou + v);
  EXPECT_NEAR(box_iou(a, b, IouVariant::kCiou), iou - rho2 / c2 - alpha * v, 1e-12);
}

TEST(BoxIou, SymmetricBoundedAndCiouBelowIou) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 2000; ++t) {
    const Box a = random_box(rng), b = random_box(rng);
    const double ab = box_iou(a, b), ba = box_iou(b, a);
    EXPECT_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_LE(box_iou(a, b, IouVariant::kCiou), ab + 1e-12);
  }
}

// Exhaustive search over assignments of distinct sizes to k clusters; each
// cluster's center is the mean of its members, cost is total 1 - IoU.
std::vector<std::pair<float, float>> brute_force_clusters(const std::vector<std::pair<float, float>>& wh, int k) {
  std::map<std::pair<float, float>, int> counts;
  for (const auto& b : wh) ++counts[b];
  std::vector<std::pair<std::pair<float, float>, int>> groups(counts.begin(), counts.end());
  const size_t m = groups.size();
  size_t total = 1;
  for (size_t i = 0; i < m; ++i) total *= k;
  double best = 1e300;
  std::vector<std::pair<float, float>> best_centers;
  for (size_t code = 0; code < total; ++code) {
    std::vector<int> lab(m);
    size_t c = code;
    for (size_t i = 0; i < m; ++i) lab[i] = static_cast<int>(c % k), c /= k;
    std::vector<double> sw(k), sh(k), n(k);
    for (size_t i = 0; i < m; ++i) {
      sw[lab[i]] += groups[i].first.first * groups[i].second;
      sh[lab[i]] += groups[i].first.second * groups[i].second;
      n[lab[i]] += groups[i].second;
    }
    if (std::count(n.begin(), n.end(), 0.0) > 0) continue;
    std::vector<std::pair<float, float>> centers(k);
    for (int j = 0; j < k; ++j) centers[j] = {float(sw[j] / n[j]), float(sh[j] / n[j])};
    double cost = 0;
    for (size_t i = 0; i < m; ++i) {
      const auto [w, h] = groups[i].first;
      const auto [cw, ch] = centers[lab[i]];
      const double inter = std::min(w, cw) * std::min(h, ch);
      cost += groups[i].second * (1.0 - inter / (w * h + cw * ch - inter));
    }
    if (cost < best) best = cost, best_centers = centers;
  }
  std::sort(best_centers.begin(), best_centers.end(),
            [](const auto& a, const auto& b) { return a.first * a.second < b.first * b.second; });
  return best_centers;
}

TEST(AutoAnchor, RecoversPlantedClusters) {
  std::vector<std::pair<float, float>> wh(50, {10.f, 10.f});
  wh.insert(wh.end(), 50, {30.f, 30.f});
  std::shuffle(wh.begin(), wh.end(), std::mt19937_64(5));
  const auto oracle = brute_force_clusters(wh, 2);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = kmeans_anchors(wh, 2, seed);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c, oracle);
    EXPECT_EQ(c[0], std::make_pair(10.f, 10.f));
    EXPECT_EQ(c[1], std::make_pair(30.f, 30.f));
  }
}

TEST(AutoAnchor, MatchesBruteForceOnSeparatedClusters) {
  std::vector<std::pair<float, float>> wh;
  for (auto [w, h, n] : {std::tuple{8.f, 12.f, 7}, {9.f, 11.f, 5}, {40.f, 30.f, 6}, {44.f, 36.f, 3}, {120.f, 90.f, 4},
                         {130.f, 100.f, 2}})
    wh.insert(wh.end(), n, {w, h});
  EXPECT_EQ(kmeans_anchors(wh, 3, 11), brute_force_clusters(wh, 3));
}

TEST(AutoAnchor, DegenerateAndErrors) {
  const std::vector<std::pair<float, float>> same(20, {17.f, 23.f});
  EXPECT_EQ(kmeans_anchors(same, 1, 0), (std::vector<std::pair<float, float>>{{17.f, 23.f}}));
  EXPECT_THROW(kmeans_anchors({}, 1, 0), ParameterError);
  EXPECT_THROW(kmeans_anchors(same, 2, 0), ParameterError);
}

TEST(AutoAnchor, GroupsNineByScaleAndStaysInHull) {
  std::mt19937_64 rng(9);
  std::lognormal_distribution<float> d(3.5f, 0.8f);
  std::vector<std::pair<float, float>> wh(400);
  float wmin = 1e9, wmax = 0, hmin = 1e9, hmax = 0;
  for (auto& b : wh) {
    b = {d(rng), d(rng)};
    wmin = std::min(wmin, b.first), wmax = std::max(wmax, b.first);
    hmin = std::min(hmin, b.second), hmax = std::max(hmax, b.second);
  }
  const AnchorSet a = auto_anchor(wh, 1);
  EXPECT_TRUE(a.valid());
  for (const auto& g : a.groups)
    for (const auto& [w, h] : g) {
      EXPECT_GE(w, wmin);
      EXPECT_LE(w, wmax);
      EXPECT_GE(h, hmin);
      EXPECT_LE(h, hmax);
    }
  EXPECT_EQ(auto_anchor(wh, 1).groups, a.groups);
}

const std::array<std::pair<int64_t, int64_t>, 3> kGrids{{{48, 80}, {24, 40}, {12, 20}}};

AnchorSet isolated_anchors() {
  AnchorSet a;
  a.groups = {{{{{20, 20}, {90, 90}, {95, 95}}},
               {{{100, 100}, {110, 110}, {120, 120}}},
               {{{200, 200}, {210, 210}, {220, 220}}}}};
  return a;
}

// Rule-tracing oracle for one gt: the cell containing the center, plus along
// each axis the non-containing cell whose center is nearest (ties to the
// higher index), found by search.
int64_t nearest_other(double g, int64_t cells) {
  int64_t inside = -1, best = -1;
  for (int64_t i = 0; i < cells; ++i)
    if (g >= i && g < i + 1) inside = i;
  if (inside < 0) inside = cells - 1;
  for (int64_t i = 0; i < cells; ++i) {
    if (i == inside) continue;
    const double d = std::abs(i + 0.5 - g);
    if (best < 0 || d < std::abs(best + 0.5 - g) || (d == std::abs(best + 0.5 - g) && i > best)) best = i;
  }
  return std::abs(best - inside) == 1 ? best : -1;
}

std::set<std::tuple<int, int, int64_t, int64_t>> traced(const Box& b, const AnchorSet& anchors) {
  std::set<std::tuple<int, int, int64_t, int64_t>> out;
  const double cx = 0.5 * (b.x1 + b.x2), cy = 0.5 * (b.y1 + b.y2), w = b.width(), h = b.height();
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 3; ++a) {
      const auto [aw, ah] = anchors.groups[s][a];
      if (std::max({w / aw, aw / w, h / ah, ah / h}) >= 4.0) continue;
      const double st = AnchorSet::kStrides[s];
      const auto [gh, gw] = kGrids[s];
      const int64_t ix = std::min<int64_t>(int64_t(cx / st), gw - 1), iy = std::min<int64_t>(int64_t(cy / st), gh - 1);
      out.emplace(s, a, iy, ix);
      if (const int64_t nx = nearest_other(cx / st, gw); nx >= 0) out.emplace(s, a, iy, nx);
      if (const int64_t ny = nearest_other(cy / st, gh); ny >= 0) out.emplace(s, a, ny, ix);
    }
  return out;
}

TEST(AssignTargets, CenterCellAndTwoNeighbors) {
  // Center (7.3, 5.2) cells at stride 8: left and upper neighbors.
  const Box b = box_from_center(7.3f * 8, 5.2f * 8, 20, 20);
  const TargetMap t = assign_targets({{{0, b}}}, isolated_anchors(), kGrids);
  std::set<std::tuple<int, int, int64_t, int64_t>> got;
  for (const auto& p : t.positives) {
    got.emplace(p.scale, p.anchor, p.gy, p.gx);
    EXPECT_EQ(p.target, b);
  }
  EXPECT_EQ(got, (std::set<std::tuple<int, int, int64_t, int64_t>>{{0, 0, 5, 7}, {0, 0, 5, 6}, {0, 0, 4, 7}}));
  EXPECT_EQ(got, traced(b, isolated_anchors()));
  float total = 0;
  for (const auto& o : t.objectness)
    for (float v : o.vec()) total += v;
  EXPECT_EQ(total, 3.f);
  EXPECT_FALSE(t.clipped);
}

TEST(AssignTargets, MatchesRuleTracingOracleOnRandomBoxes) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> cx(1.f, 639.f), cy(1.f, 383.f), sz(4.f, 300.f);
  for (int t = 0; t < 200; ++t) {
    const float w = sz(rng), h = sz(rng);
    const float x = std::clamp(cx(rng), w / 2, 640 - w / 2), y = std::clamp(cy(rng), h / 2, 384 - h / 2);
    const Box b = box_from_center(x, y, w, h);
    const TargetMap tm = assign_targets({{{0, b}}}, AnchorSet::defaults(), kGrids);
    std::set<std::tuple<int, int, int64_t, int64_t>> got;
    for (const auto& p : tm.positives) got.emplace(p.scale, p.anchor, p.gy, p.gx);
    EXPECT_EQ(got.size(), tm.positives.size());
    EXPECT_EQ(got, traced(b, AnchorSet::defaults())) << x << ' ' << y << ' ' << w << ' ' << h;
  }
}

TEST(AssignTargets, RatioGateAndEmpty) {
  const TargetMap thin = assign_targets({{{0, box_from_center(320, 192, 300, 3)}}}, AnchorSet::defaults(), kGrids);
  EXPECT_TRUE(thin.positives.empty());
  const TargetMap none = assign_targets({{}, {}}, AnchorSet::defaults(), kGrids);
  EXPECT_TRUE(none.positives.empty());
  for (const auto& o : none.objectness) {
    EXPECT_EQ(o.dim(0), 2);
    for (float v : o.vec()) EXPECT_EQ(v, 0.f);
  }
  const TargetMap out = assign_targets({{{0, Box{-10, 10, 30, 40}}}}, AnchorSet::defaults(), kGrids);
  EXPECT_TRUE(out.clipped);
  for (const auto& p : out.positives) EXPECT_EQ(p.target.x1, 0.f);
}

std::array<Tensor<float>, 3> zero_raw(int64_t n = 1) {
  return {Tensor<float>(Shape{n, 18, 48, 80}), Tensor<float>(Shape{n, 18, 24, 40}), Tensor<float>(Shape{n, 18, 12, 20})};
}

TEST(Decode, ZeroLogitsGiveAnchorAtCellCenter) {
  const auto dets = decode(zero_raw(), 0, AnchorSet::defaults(), 0.25f);
  ASSERT_EQ(dets.size(), 3u * (3840 + 960 + 240));
  // Scale 1, anchor 2, cell (y=3, x=11).
  const size_t index = 3 * 3840 + 2 * 960 + 3 * 40 + 11;
  const Box expect = box_from_center(11.5f * 16, 3.5f * 16, 59, 119);
  EXPECT_FLOAT_EQ(dets[index].box.x1, expect.x1);
  EXPECT_FLOAT_EQ(dets[index].box.y2, expect.y2);
  EXPECT_FLOAT_EQ(dets[index].confidence, 0.25f);
  EXPECT_TRUE(decode(zero_raw(), 0, AnchorSet::defaults(), 0.26f).empty());
}

TEST(Decode, SuppressedObjectnessFiltersOut) {
  auto raw = zero_raw();
  for (auto& t : raw) t.vec().assign(t.numel(), -40.f);
  EXPECT_TRUE(decode(raw, 0, AnchorSet::defaults(), kEvalConfThreshold).empty());
}

TEST(Decode, InvertsEncodingAndBoundsSizes) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> off(-0.45, 1.45), ratio(0.05, 3.9), logits(-4, 4);
  const AnchorSet anchors = AnchorSet::defaults();
  for (int t = 0; t < 300; ++t) {
    auto raw = zero_raw();
    const int s = static_cast<int>(rng() % 3), a = static_cast<int>(rng() % 3);
    const int64_t gh = raw[s].dim(2), gw = raw[s].dim(3);
    const int64_t y = static_cast<int64_t>(rng() % gh), x = static_cast<int64_t>(rng() % gw);
    const double st = AnchorSet::kStrides[s];
    const double cx = (x + off(rng)) * st, cy = (y + off(rng)) * st;
    const double w = ratio(rng) * anchors.groups[s][a].first, h = ratio(rng) * anchors.groups[s][a].second;
    float* ch = raw[s].data() + a * 6 * gh * gw + y * gw + x;
    ch[0] = float(logit((cx / st - x + 0.5) / 2));
    ch[gh * gw] = float(logit((cy / st - y + 0.5) / 2));
    ch[2 * gh * gw] = float(logit(std::sqrt(w / anchors.groups[s][a].first) / 2));
    ch[3 * gh * gw] = float(logit(std::sqrt(h / anchors.groups[s][a].second) / 2));
    ch[4 * gh * gw] = 10.f, ch[5 * gh * gw] = 10.f;
    const auto dets = decode(raw, 0, anchors, 0.9f);
    ASSERT_EQ(dets.size(), 1u);
    const Box want = box_from_center(float(cx), float(cy), float(w), float(h));
    EXPECT_NEAR(dets[0].box.x1, want.x1, 1e-4);
    EXPECT_NEAR(dets[0].box.y1, want.y1, 1e-4);
    EXPECT_NEAR(dets[0].box.x2, want.x2, 1e-4);
    EXPECT_NEAR(dets[0].box.y2, want.y2, 1e-4);
  }
  // Logits kept moderate so widths stay resolvable in float corner coordinates.
  auto raw = zero_raw();
  for (auto& r : raw)
    for (auto& v : r.vec()) v = float(logits(rng));
  for (const auto& d : decode(raw, 0, anchors, 0.f)) {
    EXPECT_GT(d.box.width(), 0.f);
    EXPECT_LT(d.box.width(), 4 * 373.f);
    EXPECT_GT(d.box.height(), 0.f);
    EXPECT_LT(d.box.height(), 4 * 326.f);
  }
}

// Unique set K with: i in K iff no higher-priority member of K overlaps i at
// the threshold. Found by fixpoint iteration from the full set.
std::vector<Detection> nms_oracle(const std::vector<Detection>& d, float thr) {
  const size_t n = d.size();
  auto before = [&](size_t j, size_t i) {
    return d[j].confidence > d[i].confidence || (d[j].confidence == d[i].confidence && j < i);
  };
  std::vector<bool> in(n, true);
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<bool> next(n);
    for (size_t i = 0; i < n; ++i) {
      bool ok = true;
      for (size_t j = 0; j < n; ++j)
        if (j != i && in[j] && before(j, i) && box_iou(d[j].box, d[i].box) >= thr) ok = false;
      next[i] = ok;
    }
    changed = next != in;
    in = next;
  }
  std::vector<size_t> idx;
  for (size_t i = 0; i < n; ++i)
    if (in[i]) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return before(a, b); });
  std::vector<Detection> out;
  for (size_t i : idx) out.push_back(d[i]);
  return out;
}

TEST(Nms, Examples) {
  const Box a{0, 0, 10, 10};
  const Box b{0, 0, 10, 9};  // IoU 0.9
  ASSERT_NEAR(box_iou(a, b), 0.9, 1e-6);
  auto kept = nms({{a, 0.9f, 0}, {b, 0.8f, 0}}, 0.5f);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].box, a);
  kept = nms({{Box{0, 0, 1, 1}, 0.1f, 0}, {Box{5, 5, 6, 6}, 0.7f, 0}, {Box{9, 9, 10, 10}, 0.4f, 0}}, 0.5f);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].confidence, 0.7f);
  EXPECT_EQ(kept[2].confidence, 0.1f);
  EXPECT_TRUE(nms({}, 0.5f).empty());
}

TEST(Nms, MatchesExhaustiveReference) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = rng() % 51;
    std::vector<Detection> d(n);
    for (auto& x : d) x = {random_box(rng, 60.f), float(rng() % 10) / 10.f, 0};
    const float thr = 0.1f + 0.8f * float(rng() % 1000) / 1000.f;
    const auto got = nms(d, thr), want = nms_oracle(d, thr);
    ASSERT_EQ(got.size(), want.size()) << trial;
    for (size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].box, want[i].box);
      EXPECT_EQ(got[i].confidence, want[i].confidence);
    }
  }
}

TEST(Detection, TextForm) {
  EXPECT_EQ(format_detection({Box{1, 2.5f, 3, 4}, 0.5f, 0}), "0 0.500000 1.000000 2.500000 3.000000 4.000000");
}

}  // namespace
