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
#include <cstring>
#include <random>

#include "tln/quant.hpp"

namespace {

using namespace tln;

TEST(FakeQuant, ClosedFormExample) {
  const Tensor<float> x(Shape{4}, {-1.f, 0.f, 0.5f, 1.f});
  EXPECT_EQ(quantize_int8(x, 1.0 / 127), (std::vector<int32_t>{-127, 0, 64, 127}));
  const Tensor<float> q = fake_quant(x, {1.0 / 127, 8});
  EXPECT_NEAR(q[0], -1.0, 1e-7);
  EXPECT_EQ(q[1], 0.f);
  EXPECT_NEAR(q[2], 0.503937, 1e-6);
  EXPECT_NEAR(q[3], 1.0, 1e-7);
}

TEST(FakeQuant, RoundHalfToEvenAndClamp) {
  const Tensor<float> x(Shape{6}, {0.5f, 1.5f, 2.5f, -2.5f, 300.f, -300.f});
  EXPECT_EQ(quantize_int8(x, 1.0), (std::vector<int32_t>{0, 2, 2, -2, 127, -127}));
}

TEST(FakeQuant, ScaleRule) {
  EXPECT_DOUBLE_EQ(int8_scale(2.0), 2.0 / 127);
  EXPECT_EQ(int8_scale(0.0), 1.0);
  EXPECT_THROW(fake_quant(Tensor<float>(Shape{1}), {0.0, 8}), ParameterError);
  EXPECT_THROW(fake_quant(Tensor<float>(Shape{1}), {1.0, 4}), ParameterError);
}

TEST(FakeQuant, ErrorBoundIdempotenceExhaustive) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    std::normal_distribution<float> n(0.f, std::exp(std::uniform_real_distribution<float>(-4, 4)(rng)));
    Tensor<float> x(Shape{2000});
    for (auto& v : x.vec()) v = n(rng);
    double m = 0;
    for (float v : x.vec()) m = std::max(m, double(std::fabs(v)));
    const QParams q{int8_scale(m), 8};
    const Tensor<float> y = fake_quant(x, q);
    for (size_t i = 0; i < x.vec().size(); ++i)
      ASSERT_LE(std::fabs(double(x[i]) - double(y[i])), q.scale / 2 * (1 + 1e-6)) << t << ' ' << i;
    EXPECT_EQ(fake_quant(y, q).vec(), y.vec());
    const Tensor<float> h = fake_quant(x, {1.0, 16});
    EXPECT_EQ(fake_quant(h, {1.0, 16}).vec(), h.vec());
  }
}

// Reference binary16 rounding by searching the representable grid.
double fp16_value(uint16_t bits) {
  const int sign = bits >> 15, exp = (bits >> 10) & 31, frac = bits & 1023;
  double v;
  if (exp == 0) v = std::ldexp(frac, -24);
  else if (exp == 31) v = frac ? NAN : INFINITY;
  else v = std::ldexp(1024 + frac, exp - 25);
  return sign ? -v : v;
}

TEST(Fp16, MatchesGridSearch) {
  std::vector<double> grid;
  for (uint32_t b = 0; b < 0x7c00; ++b) grid.push_back(fp16_value(uint16_t(b)));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> e(-27, 16.5);
  for (int t = 0; t < 20000; ++t) {
    const float x = float(std::ldexp(std::uniform_real_distribution<double>(1, 2)(rng), int(e(rng))));
    const auto hi = std::lower_bound(grid.begin(), grid.end(), double(x));
    double want;
    if (hi == grid.end()) {
      want = x >= 65520 ? INFINITY : 65504;
    } else if (*hi == x || hi == grid.begin()) {
      want = *hi;
    } else {
      const double lo = *(hi - 1), up = *hi;
      const double dl = x - lo, du = up - x;
      const size_t idx = size_t(hi - grid.begin());
      want = dl < du ? lo : du < dl ? up : (idx % 2 == 0 ? up : lo);
    }
    EXPECT_EQ(double(round_to_fp16(x)), want) << x;
    EXPECT_EQ(double(round_to_fp16(-x)), -want) << x;
  }
  EXPECT_EQ(round_to_fp16(65504.f), 65504.f);
  EXPECT_EQ(round_to_fp16(1.f + 1.f / 2048), 1.f);  // tie to even
  EXPECT_EQ(round_to_fp16(1.f + 3.f / 2048), 1.f + 2.f / 1024);
}

TEST(QMap, TextRoundTripAndErrors) {
  QMap q;
  q.weights["a.weight"] = {0.0123, 8};
  q.activations["input"] = {1.0 / 127, 8};
  q.activations["b"] = {2.5, 8};
  EXPECT_EQ(QMap::from_text(q.to_text()), q);
  EXPECT_NE(q.to_text().find("weight:a.weight 8 "), std::string::npos);
  EXPECT_THROW(QMap::from_text("x 8\n"), QuantConfigError);
  EXPECT_THROW(QMap::from_text("x 8 -1\n"), QuantConfigError);
  EXPECT_THROW(QMap::from_text("x 8 1\ny 16 1\n"), QuantConfigError);
}

ModelConfig small_config() {
  ModelConfig c = ModelConfig::named("tiny");
  c.height = 64, c.width = 128;
  return c;
}

std::vector<Sample> scenes(uint64_t seed, int n) {
  std::vector<Sample> d;
  for (int i = 0; i < n; ++i) d.push_back(synth_scene(seed, i, 64, 128));
  return d;
}

TEST(Calibrate, MaxAbsPerSiteOrderInvariantAndMonotone) {
  const Model m = build(small_config(), 2);
  auto data = scenes(3, 4);
  const QMap a = calibrate(m, data, 8);
  std::reverse(data.begin(), data.end());
  EXPECT_EQ(calibrate(m, data, 8), a);
  ASSERT_TRUE(a.activations.count(kInputSite));
  double max_in = 0;
  for (const auto& s : data)
    for (float v : s.image.vec()) max_in = std::max(max_in, double(v));
  EXPECT_DOUBLE_EQ(a.activations.at(kInputSite).scale, max_in / 127);
  for (const char* site : {"det_head.p3", "det_head.p4", "det_head.p5", "seg_da.out", "seg_ll.out"})
    EXPECT_TRUE(a.activations.count(site)) << site;
  for (const auto& e : m.params.entries()) {
    if (e.kind != ParamKind::kWeight) continue;
    EXPECT_TRUE(a.weights.count(e.name)) << e.name;
  }
  // A superset calibration set never shrinks a scale.
  auto more = data;
  for (auto& s : scenes(9, 2)) more.push_back(s);
  const QMap b = calibrate(m, more, 8);
  for (const auto& [k, q] : a.activations) EXPECT_GE(b.activations.at(k).scale, q.scale) << k;
}

TEST(Calibrate, ZeroWeightTensorGetsUnitScale) {
  Model m = build(small_config(), 2);
  m.params.entries()[0].value.fill(0.f);
  ASSERT_EQ(m.params.entries()[0].kind, ParamKind::kWeight);
  EXPECT_EQ(calibrate(m, scenes(1, 1), 8).weights.at(m.params.entries()[0].name).scale, 1.0);
}

TEST(EvalQuantized, DeterministicAndCloseToFloat) {
  const Model m = build(small_config(), 5);
  const auto data = scenes(4, 3);
  EvalOptions keep;
  keep.keep_labels = true;
  const QMap q8 = calibrate(m, data, 8), q16 = calibrate(m, data, 16);
  const EvalRun a = eval_quantized(m, q8, data, keep), b = eval_quantized(m, q8, data, keep);
  EXPECT_EQ(a.da_labels, b.da_labels);
  EXPECT_EQ(a.report.csv_row(), b.report.csv_row());
  const EvalRun f32 = evaluate(m, data, keep), f16 = eval_quantized(m, q16, data, keep);
  size_t same = 0, total = 0;
  for (size_t i = 0; i < data.size(); ++i)
    for (size_t j = 0; j < f32.da_labels[i].size(); ++j) same += f32.da_labels[i][j] == f16.da_labels[i][j], ++total;
  EXPECT_GE(double(same) / double(total), 0.99);
}

TEST(EvalQuantized, MissingSiteIsConfigurationError) {
  const Model m = build(small_config(), 5);
  const auto data = scenes(4, 1);
  QMap q = calibrate(m, data, 8);
  q.activations.erase(q.activations.begin()->first == kInputSite ? std::next(q.activations.begin())
                                                                   : q.activations.begin());
  EXPECT_THROW(eval_quantized(m, q, data), QuantConfigError);
  QMap w = calibrate(m, data, 8);
  w.weights.erase(w.weights.begin());
  EXPECT_THROW(eval_quantized(m, w, data), QuantConfigError);
}

}  // namespace
