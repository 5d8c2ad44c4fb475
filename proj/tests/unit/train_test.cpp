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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tln/context.hpp"
#include "tln/train.hpp"

namespace {

using namespace tln;

TEST(LrSchedule, WarmupThenCosine) {
  TrainHyper h;
  h.epochs = 10;
  const int64_t spe = 7, warmup = 3 * spe, total = 10 * spe;
  EXPECT_EQ(lr_at(0, h, spe), 0.0);
  EXPECT_EQ(lr_at(warmup, h, spe), 1e-3);
  EXPECT_NEAR(lr_at(total - 1, h, spe), 1e-5, 1e-18);
  EXPECT_NEAR(lr_at(warmup / 2, h, spe), 1e-3 * (warmup / 2) / warmup, 1e-18);
  // Both sides of the junction approach lr0.
  EXPECT_NEAR(lr_at(warmup - 1, h, spe), 1e-3 * (warmup - 1) / warmup, 1e-18);
  EXPECT_LT(1e-3 - lr_at(warmup + 1, h, spe), 1e-3 - lr_at(warmup + 2, h, spe));
  const double mid = warmup + (total - 1 - warmup) / 2.0;
  EXPECT_NEAR(lr_at(static_cast<int64_t>(mid), h, spe), 1e-5 + (1e-3 - 1e-5) / 2, 1e-12);
  for (int64_t s = warmup; s + 1 < total; ++s) EXPECT_LE(lr_at(s + 1, h, spe), lr_at(s, h, spe));
  EXPECT_THROW(lr_at(-1, h, spe), ParameterError);
}

TEST(LrSchedule, ContinuousAtJunctionForFineSteps) {
  TrainHyper h;
  h.epochs = 200;
  const int64_t spe = 100000, warmup = 3 * spe;
  EXPECT_NEAR(lr_at(warmup - 1, h, spe), 1e-3, 1e-8);
  EXPECT_NEAR(lr_at(warmup + 1, h, spe), 1e-3, 1e-8);
}

TEST(TrainHyper, Validation) {
  TrainHyper h;
  EXPECT_NO_THROW(h.validate(10));
  h.warmup_epochs = 200;
  EXPECT_THROW(h.validate(10), ParameterError);
  h = TrainHyper{};
  h.beta2 = 1.0;
  EXPECT_THROW(h.validate(), ParameterError);
  h = TrainHyper{};
  h.lr0 = 0;
  EXPECT_THROW(h.validate(), ParameterError);
  h = TrainHyper{};
  h.max_steps = 20;
  EXPECT_THROW(h.validate(10), ParameterError);  // warmup alone is 30 steps
}

// Hand-rolled AdamW for one scalar.
struct ScalarAdamW {
  double w, m = 0, v = 0;
  int t = 0;
  void step(double g, double lr, const TrainHyper& h, bool decay) {
    ++t;
    m = h.beta1 * m + (1 - h.beta1) * g;
    v = h.beta2 * v + (1 - h.beta2) * g * g;
    const double mhat = m / (1 - std::pow(h.beta1, t)), vhat = v / (1 - std::pow(h.beta2, t));
    const double w0 = w;
    w = w0 - lr * mhat / (std::sqrt(vhat) + h.adam_eps);
    if (decay) w -= lr * h.weight_decay * w0;
  }
};

TEST(AdamW, FirstStepFromZeroMoments) {
  TrainHyper h;
  double w = 0.5, m = 0, v = 0, g = 1;
  adamw_update<double>({&w, 1}, {&g, 1}, {&m, 1}, {&v, 1}, 1, 1e-3, h, false);
  // m-hat = 1, v-hat = 1.
  EXPECT_NEAR(w, 0.5 - 1e-3 / (1 + 1e-8), 1e-15);
}

TEST(AdamW, MatchesScalarReference) {
  TrainHyper h;
  h.weight_decay = 0.05;
  for (bool decay : {false, true}) {
    ScalarAdamW ref{0.7};
    double w = 0.7, m = 0, v = 0;
    for (int t = 1; t <= 50; ++t) {
      const double g = std::sin(0.3 * t) + 0.2, lr = 1e-2 * (1 + 0.1 * std::cos(t));
      adamw_update<double>({&w, 1}, {&g, 1}, {&m, 1}, {&v, 1}, t, lr, h, decay);
      ref.step(g, lr, h, decay);
      EXPECT_NEAR(w, ref.w, 1e-13) << t << ' ' << decay;
    }
  }
}

ParamStore two_params() {
  ParamStore p;
  p.add("conv.weight", Tensor<float>(Shape{2, 2}, {1.f, -2.f, 0.5f, 3.f}), ParamKind::kWeight);
  p.add("conv.bias", Tensor<float>(Shape{2}, {0.25f, -0.75f}), ParamKind::kBias);
  p.add("bn.weight", Tensor<float>(Shape{2}, {1.f, 1.5f}), ParamKind::kNormScale);
  return p;
}

TEST(AdamW, ZeroGradientWithoutDecayIsFixpoint) {
  TrainHyper h;
  h.weight_decay = 0;
  ParamStore p = two_params();
  const ParamStore before = p;
  AdamState st;
  for (int i = 0; i < 5; ++i) adamw_step(p, st, {}, 1e-2, h);
  for (size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p.entries()[i].value.vec(), before.entries()[i].value.vec());
  EXPECT_EQ(st.step, 5);
}

TEST(AdamW, DecoupledDecayClosedFormOnWeightsOnly) {
  TrainHyper h;
  h.weight_decay = 0.1;
  ParamStore p = two_params();
  const ParamStore before = p;
  AdamState st;
  adamw_step(p, st, {}, 0.5, h);
  const auto& w = p.get("conv.weight").vec();
  for (size_t i = 0; i < w.size(); ++i)
    EXPECT_FLOAT_EQ(w[i], before.get("conv.weight").vec()[i] * (1 - 0.5f * 0.1f));
  EXPECT_EQ(p.get("conv.bias").vec(), before.get("conv.bias").vec());
  EXPECT_EQ(p.get("bn.weight").vec(), before.get("bn.weight").vec());
}

TEST(AdamW, RejectsMisalignedGradients) {
  TrainHyper h;
  ParamStore p = two_params();
  AdamState st;
  EXPECT_THROW(adamw_step(p, st, {{"conv.weight", Tensor<float>(Shape{4})}}, 1e-3, h), ParameterError);
  EXPECT_THROW(adamw_step(p, st, {{"nope", Tensor<float>(Shape{1})}}, 1e-3, h), ParameterError);
}

TEST(Ema, SingleStepAndFrozen) {
  double e = 0, p = 1;
  ema_update<double>({&e, 1}, {&p, 1}, 0.9);
  EXPECT_NEAR(e, 0.1, 1e-15);
  double f = 0.3;
  for (int i = 0; i < 10; ++i) ema_update<double>({&f, 1}, {&p, 1}, 1.0);
  EXPECT_EQ(f, 0.3);
}

TEST(Ema, GeometricClosedForm) {
  const double p = 1.75, e0 = -0.5, d = 0.9999;
  double e = e0;
  for (int k = 1; k <= 5000; ++k) {
    ema_update<double>({&e, 1}, {&p, 1}, d);
    if (k % 500 == 0) {
      EXPECT_NEAR(e, p + (e0 - p) * std::pow(d, k), 1e-12) << k;
    }
  }
}

TEST(Ema, DecayRamp) {
  TrainHyper h;
  EXPECT_EQ(ema_decay_at(0, h), 0.0);
  EXPECT_NEAR(ema_decay_at(2000, h), 0.9999 * (1 - std::exp(-1.0)), 1e-15);
  EXPECT_LT(ema_decay_at(100000, h), 0.9999 + 1e-15);
  EXPECT_GT(ema_decay_at(100000, h), 0.9998);
}

ModelConfig small_config() {
  ModelConfig c = ModelConfig::named("tiny");
  c.height = 64, c.width = 128;
  return c;
}

std::vector<Sample> small_data(int n) {
  std::vector<Sample> d;
  for (int i = 0; i < n; ++i) d.push_back(synth_scene(5, i, 64, 128));
  return d;
}

TrainHyper short_run(int64_t steps) {
  TrainHyper h;
  h.batch = 2;
  h.epochs = 10;
  h.warmup_epochs = 1;
  h.max_steps = steps;
  return h;
}

std::string bytes_of(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Train, DeterministicTraceAndCheckpoint) {
  const auto data = small_data(4);
  const Model m = build(small_config(), 7);
  const auto a = train(m, data, short_run(4), 3), b = train(m, data, short_run(4), 3);
  ASSERT_EQ(a.trace.size(), 4u);
  for (size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(trace_csv_row(a.trace[i]), trace_csv_row(b.trace[i]));
  const auto dir = std::filesystem::temp_directory_path();
  const std::string pa = (dir / "tln_train_a.ckpt").string(), pb = (dir / "tln_train_b.ckpt").string();
  save_checkpoint(pa, a.model, a.ema ? &*a.ema : nullptr);
  save_checkpoint(pb, b.model, b.ema ? &*b.ema : nullptr);
  EXPECT_EQ(bytes_of(pa), bytes_of(pb));
  std::filesystem::remove(pa);
  std::filesystem::remove(pb);
}

TEST(Train, TraceTotalIsWeightedSumOfTerms) {
  const auto r = train(build(small_config(), 8), small_data(4), short_run(3), 1);
  for (const auto& row : r.trace) {
    const auto& l = row.loss;
    const double det = 0.5 * l.cls + 1.0 * l.obj + 0.05 * l.reg;
    const double total = 1.0 * det + 0.3 * (l.focal_da + l.tversky_da) + 0.3 * (l.focal_ll + l.tversky_ll);
    EXPECT_NEAR(l.total, total, 1e-9);
    EXPECT_GT(l.total, 0);
  }
  EXPECT_EQ(r.trace[0].lr, 0.0);
  EXPECT_EQ(trace_csv_header(),
            "step,lr,l_det_cls,l_det_obj,l_det_reg,l_da_focal,l_da_tversky,l_ll_focal,l_ll_tversky,l_total");
}

TEST(Train, EmaToggleLeavesTrajectoryBitIdentical) {
  const auto data = small_data(4);
  const Model m = build(small_config(), 9);
  TrainHyper on = short_run(3), off = short_run(3);
  off.use_ema = false;
  const auto a = train(m, data, on, 2), b = train(m, data, off, 2);
  ASSERT_TRUE(a.ema.has_value());
  EXPECT_FALSE(b.ema.has_value());
  for (size_t i = 0; i < a.model.params.size(); ++i)
    EXPECT_EQ(a.model.params.entries()[i].value.vec(), b.model.params.entries()[i].value.vec());
  // The shadow tracks the trained weights but lags them.
  EXPECT_NE(a.ema->params.entries()[0].value.vec(), a.model.params.entries()[0].value.vec());
}

double batch_loss(const Model& m, const std::vector<Sample>& data) {
  const Batch b = make_batch({&data[0], &data[1]}, kTrainLaneWidth);
  Model copy = m;
  Ctx ctx(copy.params, copy.buffers, nullptr);
  const ModelOutput out = forward(copy, ctx, constant(b.images));
  std::array<std::pair<int64_t, int64_t>, 3> grids;
  for (int s = 0; s < 3; ++s) grids[s] = {out.det[s].dim(2), out.det[s].dim(3)};
  const TargetMap t = assign_targets(b.gt, m.anchors, grids);
  return total_loss<float>(out.det, out.da, out.ll, t, m.anchors, b.drivable, b.lanes).report.total;
}

TEST(Train, SmallStepDecreasesLossOnFixedBatch) {
  const auto data = small_data(2);
  const Model m = build(small_config(), 10);
  const double before = batch_loss(m, data);
  // Plain gradient step at lr 1e-5 on the same batch.
  const Batch b = make_batch({&data[0], &data[1]}, kTrainLaneWidth);
  Model work = m;
  Tape<float> tape;
  Ctx ctx(work.params, work.buffers, &tape);
  const ModelOutput out = forward(work, ctx, constant(b.images));
  std::array<std::pair<int64_t, int64_t>, 3> grids;
  for (int s = 0; s < 3; ++s) grids[s] = {out.det[s].dim(2), out.det[s].dim(3)};
  const TargetMap t = assign_targets(b.gt, work.anchors, grids);
  const auto loss = total_loss<float>(out.det, out.da, out.ll, t, work.anchors, b.drivable, b.lanes);
  EXPECT_NEAR(loss.report.total, before, 1e-5);
  const auto grads = backward(tape, loss.total);
  Model stepped = m;
  for (auto& e : stepped.params.entries()) {
    const auto& g = grads.at(e.name).vec();
    for (size_t i = 0; i < g.size(); ++i) e.value.vec()[i] -= 1e-5f * g[i];
  }
  EXPECT_LT(batch_loss(stepped, data), before);
}

TEST(Train, RejectsEmptyDataset) { EXPECT_THROW(train(build(small_config(), 1), {}, short_run(2), 1), ParameterError); }

}  // namespace
