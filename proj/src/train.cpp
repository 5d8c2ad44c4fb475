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

#include "tln/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "tln/context.hpp"

namespace tln {

int64_t TrainHyper::total_steps(int64_t steps_per_epoch) const {
  return max_steps > 0 ? max_steps : epochs * steps_per_epoch;
}

void TrainHyper::validate(int64_t steps_per_epoch) const {
  if (!(lr0 > 0)) throw ParameterError("lr0 must be positive");
  if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1)) throw ParameterError("betas must lie in (0, 1)");
  if (!(adam_eps > 0) || weight_decay < 0) throw ParameterError("adam eps must be positive, weight decay non-negative");
  if (epochs < 1 || batch < 1 || warmup_epochs < 0 || max_steps < 0) throw ParameterError("bad epoch/batch counts");
  if (warmup_epochs >= epochs) throw ParameterError("warmup_epochs must be below epochs");
  if (warmup_epochs * steps_per_epoch >= total_steps(steps_per_epoch))
    throw ParameterError("warmup covers every training step");
  if (!(lr_final_fraction >= 0 && lr_final_fraction <= 1)) throw ParameterError("lr_final_fraction must lie in [0, 1]");
  if (!(ema_decay >= 0 && ema_decay <= 1) || !(ema_ramp > 0)) throw ParameterError("bad EMA decay");
  if (lane_width < 1) throw ParameterError("lane width must be positive");
  loss.validate();
}

double lr_at(int64_t step, const TrainHyper& hyper, int64_t steps_per_epoch) {
  if (step < 0) throw ParameterError("lr_at: negative step");
  const int64_t warmup = hyper.warmup_epochs * steps_per_epoch;
  if (step < warmup) return hyper.lr0 * static_cast<double>(step) / static_cast<double>(warmup);
  const double lr_final = hyper.lr0 * hyper.lr_final_fraction;
  const int64_t span = hyper.total_steps(steps_per_epoch) - 1 - warmup;
  const double t = span > 0 ? std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(span)) : 0.0;
  return lr_final + (hyper.lr0 - lr_final) * (1 + std::cos(std::numbers::pi * t)) / 2;
}

template <class T>
void adamw_update(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v, int64_t t, double lr,
                  const TrainHyper& hyper, bool decay) {
  if (g.size() != w.size() || m.size() != w.size() || v.size() != w.size())
    throw ParameterError("adamw: gradient or moment size differs from the parameter");
  if (t < 1) throw ParameterError("adamw: step counts from 1");
  const double b1 = hyper.beta1, b2 = hyper.beta2;
  const double c1 = 1 - std::pow(b1, static_cast<double>(t)), c2 = 1 - std::pow(b2, static_cast<double>(t));
  const double lambda = decay ? hyper.weight_decay : 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    const double gi = g[i];
    const double mi = b1 * m[i] + (1 - b1) * gi;
    const double vi = b2 * v[i] + (1 - b2) * gi * gi;
    m[i] = static_cast<T>(mi), v[i] = static_cast<T>(vi);
    const double wi = w[i];
    w[i] = static_cast<T>(wi - lr * ((mi / c1) / (std::sqrt(vi / c2) + hyper.adam_eps) + lambda * wi));
  }
}

template void adamw_update(std::span<float>, std::span<const float>, std::span<float>, std::span<float>, int64_t,
                           double, const TrainHyper&, bool);
template void adamw_update(std::span<double>, std::span<const double>, std::span<double>, std::span<double>, int64_t,
                           double, const TrainHyper&, bool);

void adamw_step(ParamStore& params, AdamState& state, const std::map<std::string, Tensor<float>>& grads, double lr,
                const TrainHyper& hyper) {
  auto& entries = params.entries();
  if (state.m.empty()) {
    for (const auto& e : entries) state.m.emplace_back(e.value.shape()), state.v.emplace_back(e.value.shape());
  }
  if (state.m.size() != entries.size()) throw ParameterError("adamw: optimizer state does not match the parameters");
  for (const auto& [name, g] : grads)
    if (!params.contains(name)) throw ParameterError("adamw: gradient for unknown parameter " + name);
  ++state.step;
  for (size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    if (state.m[i].shape() != e.value.shape()) throw ParameterError("adamw: moment shape mismatch for " + e.name);
    const auto it = grads.find(e.name);
    Tensor<float> zero;
    if (it == grads.end()) zero = Tensor<float>(e.value.shape());
    const Tensor<float>& g = it == grads.end() ? zero : it->second;
    if (g.shape() != e.value.shape()) throw ParameterError("adamw: gradient shape mismatch for " + e.name);
    adamw_update<float>(e.value.span(), g.span(), state.m[i].span(), state.v[i].span(), state.step, lr, hyper,
                        e.kind == ParamKind::kWeight);
  }
}

double ema_decay_at(int64_t updates, const TrainHyper& hyper) {
  return hyper.ema_decay * (1 - std::exp(-static_cast<double>(updates) / hyper.ema_ramp));
}

template <class T>
void ema_update(std::span<T> ema, std::span<const T> params, double decay) {
  if (ema.size() != params.size()) throw ParameterError("ema_update: shape mismatch");
  for (size_t i = 0; i < ema.size(); ++i) ema[i] = static_cast<T>(decay * ema[i] + (1 - decay) * params[i]);
}

template void ema_update(std::span<float>, std::span<const float>, double);
template void ema_update(std::span<double>, std::span<const double>, double);

namespace {

void ema_store(ParamStore& ema, const ParamStore& src, double decay) {
  if (ema.size() != src.size()) throw ParameterError("ema_update: shadow does not mirror the model");
  for (size_t i = 0; i < ema.size(); ++i) {
    auto& e = ema.entries()[i];
    const auto& s = src.entries()[i];
    if (e.name != s.name || e.value.shape() != s.value.shape())
      throw ParameterError("ema_update: shape mismatch for " + s.name);
    ema_update<float>(e.value.span(), s.value.span(), decay);
  }
}

// Named terms in trace order.
std::vector<std::pair<const char*, double>> terms(const LossReport& r) {
  return {{"l_det_cls", r.cls},         {"l_det_obj", r.obj},   {"l_det_reg", r.reg},
          {"l_da_focal", r.focal_da},   {"l_da_tversky", r.tversky_da}, {"l_ll_focal", r.focal_ll},
          {"l_ll_tversky", r.tversky_ll}, {"l_total", r.total}};
}

}  // namespace

void ema_update(EmaShadow& ema, const Model& model, double decay) {
  ema_store(ema.params, model.params, decay);
  ema_store(ema.buffers, model.buffers, decay);
}

std::string trace_csv_header() {
  std::string h = "step,lr";
  for (const auto& [name, v] : terms(LossReport{})) h += std::string(",") + name;
  return h;
}

std::string trace_csv_row(const TraceRow& row) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%lld,%.17g", static_cast<long long>(row.step), row.lr);
  std::string s = buf;
  for (const auto& [name, v] : terms(row.loss)) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    s += buf;
  }
  return s;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << trace_csv_header() << '\n';
  for (const auto& r : trace) out << trace_csv_row(r) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

Model TrainResult::inference_model() const {
  Model m = model;
  if (ema) m.params = ema->params, m.buffers = ema->buffers;
  return m;
}

namespace {

std::vector<std::pair<float, float>> training_sizes(const std::vector<Sample>& data, const ModelConfig& cfg) {
  std::vector<std::pair<float, float>> wh;
  for (const auto& s : data)
    for (const auto& b : s.boxes) {
      const float w = b.w * static_cast<float>(cfg.width), h = b.h * static_cast<float>(cfg.height);
      if (w > 0 && h > 0) wh.emplace_back(w, h);
    }
  return wh;
}

}  // namespace

TrainResult train(Model model, const std::vector<Sample>& data, const TrainHyper& hyper, uint64_t seed,
                  const std::function<void(const TraceRow&)>& on_step) {
  if (data.empty()) throw ParameterError("train: empty dataset");
  const int64_t n = static_cast<int64_t>(data.size());
  const int64_t batch = std::min(hyper.batch, n);
  const int64_t spe = n / batch;
  hyper.validate(spe);
  const int64_t total = hyper.total_steps(spe);

  if (hyper.auto_anchor) {
    const auto wh = training_sizes(data, model.config);
    if (std::set<std::pair<float, float>>(wh.begin(), wh.end()).size() >= 9) model.anchors = auto_anchor(wh, seed);
  }

  TrainResult r;
  if (hyper.use_ema) r.ema = EmaShadow{model.params, model.buffers};
  std::mt19937_64 rng(seed);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int64_t step = 0; step < total; ++step) {
    if (step % spe == 0) std::shuffle(order.begin(), order.end(), rng);
    const int64_t first = (step % spe) * batch;
    std::vector<const Sample*> picked;
    for (int64_t i = 0; i < batch; ++i) picked.push_back(&data[order[static_cast<size_t>(first + i)]]);
    const Batch b = make_batch(picked, hyper.lane_width);

    Tape<float> tape;
    Ctx ctx(model.params, model.buffers, &tape);
    const ModelOutput out = forward(model, ctx, constant(b.images));
    std::array<std::pair<int64_t, int64_t>, 3> grids;
    for (int s = 0; s < 3; ++s) grids[s] = {out.det[s].dim(2), out.det[s].dim(3)};
    const TargetMap targets = assign_targets(b.gt, model.anchors, grids);
    const LossOutput<float> loss =
        total_loss<float>(out.det, out.da, out.ll, targets, model.anchors, b.drivable, b.lanes, hyper.loss);

    TraceRow row{step, lr_at(step, hyper, spe), loss.report};
    for (const auto& [name, v] : terms(row.loss))
      if (!std::isfinite(v))
        throw TrainingError("non-finite " + std::string(name) + " at step " + std::to_string(step));

    const auto grads = backward(tape, loss.total);
    for (const auto& [name, g] : grads)
      if (!g.all_finite()) throw TrainingError("non-finite gradient of " + name + " at step " + std::to_string(step));
    adamw_step(model.params, r.optimizer, grads, row.lr, hyper);
    if (r.ema) ema_update(*r.ema, model, ema_decay_at(step + 1, hyper));

    r.trace.push_back(row);
    if (on_step) on_step(row);
  }
  r.model = std::move(model);
  return r;
}

}  // namespace tln
