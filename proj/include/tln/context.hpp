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

// Execution context threaded through every block's forward pass.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tln/autograd.hpp"
#include "tln/ops.hpp"
#include "tln/params.hpp"

namespace tln {

class Ctx {
 public:
  /// Inference over const parameters: eval-mode normalization, no tape.
  explicit Ctx(const ParamStore& params, const ParamStore& buffers);
  /// Training (tape may be null for a no-grad batch-statistics pass).
  Ctx(const ParamStore& params, ParamStore& buffers, Tape<float>* tape);

  bool training() const { return training_; }
  Tape<float>* tape() const { return tape_; }

  /// Parameter as a graph value; a named tape leaf when recording.
  Var<float> param(const std::string& name);
  /// Running-statistics state for a batchnorm named `prefix`.
  BatchNormState<float> norm_state(const std::string& prefix);

  /// Marks the output of a named unit; applies site_hook.
  Var<float> site(const std::string& name, Var<float> x);
  /// Records a named feature map's shape when tracing.
  const Var<float>& tag(const std::string& name, const Var<float>& x);

  /// Applied to every output site (quantization simulation, calibration).
  std::function<Var<float>(const std::string&, Var<float>)> site_hook;
  /// Applied to parameter values before use (weight quantization).
  std::function<Tensor<float>(const ParamEntry&)> weight_transform;
  float norm_eps = 1e-5f;
  float norm_momentum = 0.1f;
  /// When set, receives (feature name, shape) for every tag in forward order.
  std::vector<std::pair<std::string, Shape>>* trace = nullptr;

 private:
  const ParamStore& params_;
  const ParamStore& buffers_ro_;
  ParamStore* buffers_rw_ = nullptr;
  Tape<float>* tape_ = nullptr;
  bool training_ = false;
  std::map<std::string, Var<float>> cache_;
  std::map<std::string, Tensor<float>> eval_stats_;
};

}  // namespace tln
