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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tln/data.hpp"
#include "tln/losses.hpp"
#include "tln/model.hpp"

namespace tln {

/// A loss or gradient went non-finite; the message names the term and step.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainHyper {
  double lr0 = 1e-3;
  double beta1 = 0.937, beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 5e-4;
  int64_t epochs = 200;
  int64_t batch = 16;
  int64_t warmup_epochs = 3;
  double lr_final_fraction = 0.01;
  double ema_decay = 0.9999;
  double ema_ramp = 2000;
  bool use_ema = true;
  /// Overrides epochs * steps_per_epoch when positive.
  int64_t max_steps = 0;
  int lane_width = kTrainLaneWidth;
  /// Re-derive anchors from the training boxes before the first step.
  bool auto_anchor = true;
  LossWeights loss;

  int64_t total_steps(int64_t steps_per_epoch) const;
  void validate(int64_t steps_per_epoch = 1) const;
};

/// Linear warmup from 0 to lr0, then cosine down to lr0 * lr_final_fraction
/// at the last step.
double lr_at(int64_t step, const TrainHyper& hyper, int64_t steps_per_epoch);

/// First and second moments, aligned with ParamStore entry order.
struct AdamState {
  int64_t step = 0;
  std::vector<Tensor<float>> m, v;
};

/// One AdamW update of a flat tensor; t is the 1-based step.
template <class T>
void adamw_update(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v, int64_t t, double lr,
                  const TrainHyper& hyper, bool decay);

/// Decoupled decay applies to conv weights only. A parameter without a
/// gradient is updated as if its gradient were zero.
void adamw_step(ParamStore& params, AdamState& state, const std::map<std::string, Tensor<float>>& grads, double lr,
                const TrainHyper& hyper);

/// decay * (1 - exp(-updates / ramp)).
double ema_decay_at(int64_t updates, const TrainHyper& hyper);

template <class T>
void ema_update(std::span<T> ema, std::span<const T> params, double decay);

/// Shadows both parameters and normalization statistics.
void ema_update(EmaShadow& ema, const Model& model, double decay);

struct TraceRow {
  int64_t step = 0;
  double lr = 0;
  LossReport loss;
};

std::string trace_csv_header();
std::string trace_csv_row(const TraceRow& row);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

struct TrainResult {
  Model model;
  std::optional<EmaShadow> ema;
  AdamState optimizer;
  std::vector<TraceRow> trace;

  /// EMA weights when present, otherwise the trained weights.
  Model inference_model() const;
};

/// The training loop over `data`: shuffled mini-batches each epoch (last partial
/// batch dropped), train-mode forward, target assignment, composite loss,
/// backward, AdamW at lr_at, EMA update.
TrainResult train(Model model, const std::vector<Sample>& data, const TrainHyper& hyper, uint64_t seed,
                  const std::function<void(const TraceRow&)>& on_step = {});

}  // namespace tln
