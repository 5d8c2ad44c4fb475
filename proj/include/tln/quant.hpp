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
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tln/evaluate.hpp"

namespace tln {

/// A quantized forward pass met a site or weight absent from the map.
class QuantConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kInt8Max = 127;

/// Symmetric per-tensor parameters (zero point 0). 16 bits means an FP16
/// cast, where scale is unused.
struct QParams {
  double scale = 1.0;
  int bits = 8;
  bool operator==(const QParams&) const = default;
  void validate() const;
};

/// max_abs / 127, or 1 for an all-zero tensor.
double int8_scale(double max_abs);

/// clamp(round_half_even(x / scale), -127, 127).
std::vector<int32_t> quantize_int8(const Tensor<float>& x, double scale);

/// Nearest binary16 value (ties to even), returned as float.
float round_to_fp16(float x);

Tensor<float> fake_quant(const Tensor<float>& x, const QParams& q);

/// Input image site name.
inline constexpr const char* kInputSite = "input";

struct QMap {
  int bits = 8;
  std::map<std::string, QParams> weights;      // conv weight parameters
  std::map<std::string, QParams> activations;  // output sites and the input

  /// "site_name bits scale" per line; weight lines are prefixed "weight:".
  std::string to_text() const;
  static QMap from_text(const std::string& text);
  bool operator==(const QMap&) const = default;
};

/// Max-abs calibration over the eval-mode pass of every sample.
QMap calibrate(const Model& model, const std::vector<Sample>& samples, int bits);

/// Fake-quantizes every conv weight and every calibrated site of `ctx`.
void install_quantization(Ctx& ctx, const QMap& qmap);

EvalRun eval_quantized(const Model& model, const QMap& qmap, const std::vector<Sample>& samples,
                       EvalOptions options = {});

}  // namespace tln
