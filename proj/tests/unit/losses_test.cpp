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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tln/losses.hpp"
#include "tln/ops.hpp"

namespace {

using namespace tln;

// Two-channel probability map with channel 1 = fg.
Var<double> probs_from_fg(const std::vector<double>& fg, int64_t h, int64_t w) {
  Tensor<double> t(Shape{1, 2, h, w});
  const int64_t plane = h * w;
  for (int64_t i = 0; i < plane; ++i) t[i] = 1.0 - fg[i], t[plane + i] = fg[i];
  return constant(std::move(t));
}

Tensor<double> mask(const std::vector<double>& m, int64_t h, int64_t w) { return Tensor<double>(Shape{1, 1, h, w}, m); }

TEST(LossWeights, DefaultsAndWeightedSums) {
  const LossWeights w;
  EXPECT_EQ(w.cls, 0.5);
  EXPECT_EQ(w.obj, 1.0);
  EXPECT_EQ(w.reg, 0.05);
  EXPECT_EQ(w.da, 0.3);
  EXPECT_EQ(w.ll, 0.3);
  EXPECT_NEAR(detection_weighted(0.2, 0.4, 0.6), 0.53, 1e-6);
  EXPECT_NEAR(total_weighted(1, 2, 3), 2.5, 1e-6);
  EXPECT_EQ(total_weighted(0, 0, 0), 0.0);
  EXPECT_NO_THROW(w.validate());
  LossWeights bad = w;
  bad.tversky_ll.alpha = 1.0;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(FocalLoss, ClosedFormValue) {
  const auto p = probs_from_fg({0.9, 0.1}, 1, 2);
  const double v = focal_loss(p, mask({1, 0}, 1, 2), 0.25, 2.0).value()[0];
  EXPECT_NEAR(v, 2.6341e-4, 1e-6);
  EXPECT_NEAR(v, 0.25 * 0.01 * -std::log(0.9), 1e-15);
}

TEST(FocalLoss, ReducesToCrossEntropy) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> fg(30), m(30);
  double ce = 0;
  for (size_t i = 0; i < fg.size(); ++i) {
    fg[i] = u(rng), m[i] = double(rng() % 2);
    ce += -std::log(m[i] == 1 ? fg[i] : 1 - fg[i]);
  }
  ce /= 30;
  EXPECT_NEAR(focal_loss(probs_from_fg(fg, 5, 6), mask(m, 5, 6), 1.0, 0.0).value()[0], ce, 1e-9);
}

TEST(FocalLoss, PerfectPredictionAndClamp) {
  EXPECT_EQ(focal_loss(probs_from_fg({1, 0}, 1, 2), mask({1, 0}, 1, 2), 0.25, 2.0).value()[0], 0.0);
  const double wrong = focal_loss(probs_from_fg({0, 1}, 1, 2), mask({1, 0}, 1, 2), 0.25, 2.0).value()[0];
  EXPECT_NEAR(wrong, 0.25 * -std::log(1e-12), 1e-9);
}

TEST(FocalLoss, NonNegativeAndMonotoneInTrueClassProbability) {
  for (double gamma : {0.0, 0.5, 2.0, 3.0}) {
    double prev = 1e300;
    for (int i = 1; i < 200; ++i) {
      const double pt = i / 200.0;
      const double v = focal_loss(probs_from_fg({pt}, 1, 1), mask({1}, 1, 1), 0.25, gamma).value()[0];
      EXPECT_GE(v, 0.0);
      EXPECT_LT(v, prev) << gamma << ' ' << pt;
      prev = v;
    }
  }
}

TEST(TverskyLoss, HardCountExample) {
  // 8 TP, 2 FN, 4 FP, 6 TN.
  std::vector<double> fg, m;
  for (int i = 0; i < 8; ++i) fg.push_back(1), m.push_back(1);
  for (int i = 0; i < 2; ++i) fg.push_back(0), m.push_back(1);
  for (int i = 0; i < 4; ++i) fg.push_back(1), m.push_back(0);
  for (int i = 0; i < 6; ++i) fg.push_back(0), m.push_back(0);
  const double v = tversky_loss(probs_from_fg(fg, 4, 5), mask(m, 4, 5), 0.7, 0.3, 0.0).value()[0];
  EXPECT_NEAR(v, 0.245283, 1e-6);
  EXPECT_NEAR(v, 1 - 8 / 10.6, 1e-12);
}

TEST(TverskyLoss, HalfWeightsEqualDice) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> fg(24), m(24);
    double tp = 0, psum = 0, ysum = 0;
    for (size_t i = 0; i < fg.size(); ++i) {
      fg[i] = u(rng), m[i] = double(rng() % 2);
      tp += fg[i] * m[i], psum += fg[i], ysum += m[i];
    }
    const double dice = 1 - 2 * tp / (psum + ysum);
    EXPECT_NEAR(tversky_loss(probs_from_fg(fg, 4, 6), mask(m, 4, 6), 0.5, 0.5, 0.0).value()[0], dice, 1e-9);
  }
}

TEST(TverskyLoss, RangeMonotonicityAndPerfectPrediction) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> fg(16), m(16);
    for (size_t i = 0; i < 16; ++i) fg[i] = double(rng() % 2), m[i] = double(rng() % 2);
    m[0] = 1, fg[0] = 0;  // at least one false negative
    m[1] = 1, fg[1] = 1;  // and one true positive
    const auto p = probs_from_fg(fg, 4, 4);
    double prev = -1;
    for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double v = tversky_loss(p, mask(m, 4, 4), alpha, 0.3, 0.0).value()[0];
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_GT(v, prev);
      prev = v;
    }
    EXPECT_EQ(tversky_loss(probs_from_fg(m, 4, 4), mask(m, 4, 4), 0.7, 0.3, 0.0).value()[0], 0.0);
  }
}

TEST(SegmentationLosses, InvariantToPixelOrder) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> fg(36), m(36);
  for (size_t i = 0; i < 36; ++i) fg[i] = u(rng), m[i] = double(rng() % 2);
  std::vector<size_t> perm(36);
  std::iota(perm.begin(), perm.end(), size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> fg2(36), m2(36);
  for (size_t i = 0; i < 36; ++i) fg2[i] = fg[perm[i]], m2[i] = m[perm[i]];
  EXPECT_NEAR(focal_loss(probs_from_fg(fg, 6, 6), mask(m, 6, 6), 0.25, 2).value()[0],
              focal_loss(probs_from_fg(fg2, 3, 12), mask(m2, 3, 12), 0.25, 2).value()[0], 1e-12);
  EXPECT_NEAR(tversky_loss(probs_from_fg(fg, 6, 6), mask(m, 6, 6), 0.9, 0.1, 1).value()[0],
              tversky_loss(probs_from_fg(fg2, 3, 12), mask(m2, 3, 12), 0.9, 0.1, 1).value()[0], 1e-12);
}

const std::array<std::pair<int64_t, int64_t>, 3> kGrids{{{8, 12}, {4, 6}, {2, 3}}};

std::array<Var<double>, 3> raw_vars(std::array<Tensor<double>, 3> t) {
  return {constant(std::move(t[0])), constant(std::move(t[1])), constant(std::move(t[2]))};
}

TEST(DetectionTerms, NoPositivesLeavesOnlyObjectness) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  std::array<Tensor<double>, 3> raw;
  double obj = 0, cells = 0;
  for (int s = 0; s < 3; ++s) {
    raw[s] = Tensor<double>(Shape{2, 18, kGrids[s].first, kGrids[s].second});
    for (auto& v : raw[s].vec()) v = u(rng);
    const int64_t plane = kGrids[s].first * kGrids[s].second;
    for (int64_t n = 0; n < 2; ++n)
      for (int a = 0; a < 3; ++a)
        for (int64_t q = 0; q < plane; ++q) {
          const double x = raw[s][(n * 18 + a * 6 + 4) * plane + q];
          obj += std::log(1 + std::exp(x)), cells += 1;
        }
  }
  const TargetMap t = assign_targets({{}, {}}, AnchorSet::defaults(), kGrids);
  const auto terms = detection_terms(raw_vars(raw), t, AnchorSet::defaults()).value();
  EXPECT_EQ(terms[0], 0.0);
  EXPECT_NEAR(terms[1], obj / cells, 1e-12);
  EXPECT_EQ(terms[2], 0.0);
}

double logit(double p) { return std::log(p / (1 - p)); }

TEST(DetectionTerms, ExactBoxHasZeroRegressionLoss) {
  const AnchorSet anchors = AnchorSet::defaults();
  const Box gt = box_from_center(37.3f, 41.9f, 21.f, 29.f);
  const TargetMap t = assign_targets({{{0, gt}}}, anchors, kGrids);
  ASSERT_FALSE(t.positives.empty());
  std::array<Tensor<double>, 3> raw;
  for (int s = 0; s < 3; ++s) raw[s] = Tensor<double>(Shape{1, 18, kGrids[s].first, kGrids[s].second});
  for (const auto& p : t.positives) {
    const int64_t gw = kGrids[p.scale].second, plane = kGrids[p.scale].first * gw;
    const double st = AnchorSet::kStrides[p.scale];
    double* ch = raw[p.scale].data() + p.anchor * 6 * plane + p.gy * gw + p.gx;
    ch[0] = logit((37.3 / st - p.gx + 0.5) / 2);
    ch[plane] = logit((41.9 / st - p.gy + 0.5) / 2);
    ch[2 * plane] = logit(std::sqrt(21.0 / anchors.groups[p.scale][p.anchor].first) / 2);
    ch[3 * plane] = logit(std::sqrt(29.0 / anchors.groups[p.scale][p.anchor].second) / 2);
  }
  const auto terms = detection_terms(raw_vars(raw), t, anchors).value();
  EXPECT_NEAR(terms[2], 0.0, 1e-6);
  EXPECT_NEAR(terms[0], std::log(2.0), 1e-12);
}

TEST(TotalLoss, ReportMatchesWeightedSumsAndGraph) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2, 2);
  std::array<Tensor<double>, 3> raw;
  for (int s = 0; s < 3; ++s) {
    raw[s] = Tensor<double>(Shape{1, 18, kGrids[s].first, kGrids[s].second});
    for (auto& v : raw[s].vec()) v = u(rng);
  }
  Tensor<double> da(Shape{1, 2, 8, 8}), ll(Shape{1, 2, 8, 8}), dm(Shape{1, 1, 8, 8}), lm(Shape{1, 1, 8, 8});
  for (auto* t : {&da, &ll})
    for (auto& v : t->vec()) v = u(rng);
  for (auto* t : {&dm, &lm})
    for (auto& v : t->vec()) v = double(rng() % 2);
  const TargetMap t = assign_targets({{{0, box_from_center(40, 30, 20, 25)}}}, AnchorSet::defaults(), kGrids);
  const LossWeights w;
  const auto out = total_loss(raw_vars(raw), constant(da), constant(ll), t, AnchorSet::defaults(), dm, lm, w);
  const LossReport& r = out.report;
  EXPECT_NEAR(r.det, 0.5 * r.cls + 1.0 * r.obj + 0.05 * r.reg, 1e-9);
  EXPECT_NEAR(r.da, r.focal_da + r.tversky_da, 1e-9);
  EXPECT_NEAR(r.ll, r.focal_ll + r.tversky_ll, 1e-9);
  EXPECT_NEAR(r.total, r.det + 0.3 * r.da + 0.3 * r.ll, 1e-9);
  EXPECT_NEAR(out.total.value()[0], r.total, 1e-9);
  EXPECT_NE(r.format(3).find("total 3 "), std::string::npos);
}

}  // namespace
