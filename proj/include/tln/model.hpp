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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tln/anchors.hpp"
#include "tln/blocks.hpp"

namespace tln {

struct FeatureFlags {
  bool use_pcaa = true;
  bool use_litepan = true;
  bool use_spp = true;
  bool operator==(const FeatureFlags&) const = default;
};

struct ModelConfig {
  std::string name = "custom";
  std::array<int64_t, 5> c{};  // C1..C5
  int64_t p = 0;               // LitePAN width
  int64_t f = 0;               // PCAA output
  int64_t u1 = 0, u2 = 0;
  int64_t repeats_p = 1, repeats_q = 1;
  int64_t height = 384, width = 640;
  int64_t patch = 8;
  FeatureFlags features;

  /// tiny, small or base.
  static ModelConfig named(const std::string& name);
  void validate() const;
  /// Canonical text form, stored in checkpoints.
  std::string descriptor() const;
  static ModelConfig from_descriptor(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

struct ModelOutput {
  std::array<Var<float>, 3> det;  // raw (N,18,H/s,W/s) for s = 8, 16, 32
  Var<float> da;                  // drivable-area logits (N,2,H,W)
  Var<float> ll;                  // lane-line logits (N,2,H,W)
};

class Model {
 public:
  ModelConfig config;
  ParamStore params;
  ParamStore buffers;  // batchnorm running statistics
  AnchorSet anchors = AnchorSet::defaults();
  std::vector<ConvLayer> layers;
  int64_t norm_channels = 0;
  int64_t slope_channels = 0;

  // Encoder.
  ConvBNAct level1, merge1, merge2, merge2_image, merge3, level4, level5;
  EspBlock stage2_down, stage3_down;
  std::vector<EspBlock> stage2, stage3;
  // Decoders.
  Spp spp;
  LitePan neck;
  std::array<ConvBNAct, 3> lateral_only;  // when LitePAN is disabled
  DetHead det_head;
  Pcaa pcaa;
  ConvBNAct pcaa_off;  // when PCAA is disabled
  SegHead seg_da, seg_ll;
};

Model build(const ModelConfig& config, uint64_t seed);

ModelOutput forward(const Model& model, Ctx& ctx, const Var<float>& image);
/// Eval-mode forward without a tape.
ModelOutput infer(const Model& model, const Tensor<float>& image);

/// Trainable element count (running statistics excluded).
int64_t count_params(const Model& model);
/// Same count derived from the layer table and norm/activation widths.
int64_t analytic_param_count(const Model& model);
/// Multiply-adds of one forward pass on a single h x w image.
int64_t count_flops(const Model& model, int64_t h, int64_t w);
/// Multiply-adds grouped by top-level module, in definition order.
std::vector<std::pair<std::string, int64_t>> flops_by_module(const Model& model, int64_t h, int64_t w);
/// Multiply-adds measured by running the forward pass.
uint64_t measured_flops(const Model& model, int64_t h, int64_t w);

/// (feature name, shape) for every tagged feature map of one forward pass.
std::vector<std::pair<std::string, Shape>> shape_table(const Model& model, int64_t batch = 1);

// ------------------------------------------------------------- checkpoints

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ConfigMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ShapeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class TruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct EmaShadow {
  ParamStore params;
  ParamStore buffers;
};

void save_checkpoint(const std::string& path, const Model& model, const EmaShadow* ema = nullptr);

struct LoadedCheckpoint {
  Model model;
  std::optional<EmaShadow> ema;
  /// The model with EMA weights substituted when a shadow is present.
  Model inference_model() const;
};

/// With `expected`, a checkpoint for a different configuration is rejected.
LoadedCheckpoint load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr);

}  // namespace tln
