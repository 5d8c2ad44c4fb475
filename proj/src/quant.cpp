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

#include "tln/quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tln {

void QParams::validate() const {
  if (bits != 8 && bits != 16) throw ParameterError("quantization bits must be 8 or 16");
  if (!(scale > 0) || !std::isfinite(scale)) throw ParameterError("quantization scale must be positive");
}

double int8_scale(double max_abs) { return max_abs > 0 ? max_abs / kInt8Max : 1.0; }

namespace {

// std::nearbyint honors the default round-to-nearest-even mode.
int32_t to_int8(float x, double scale) {
  const double r = std::nearbyint(static_cast<double>(x) / scale);
  return static_cast<int32_t>(std::clamp(r, -double(kInt8Max), double(kInt8Max)));
}

double max_abs(const Tensor<float>& t) {
  double m = 0;
  for (float v : t.vec()) m = std::max(m, static_cast<double>(std::fabs(v)));
  return m;
}

}  // namespace

std::vector<int32_t> quantize_int8(const Tensor<float>& x, double scale) {
  QParams{scale, 8}.validate();
  std::vector<int32_t> out(x.vec().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = to_int8(x.vec()[i], scale);
  return out;
}

float round_to_fp16(float x) {
  if (!std::isfinite(x)) return x;
  const double a = std::fabs(static_cast<double>(x));
  // Halfway between 65504 and the next (absent) binade step rounds to inf.
  if (a >= 65520.0) return std::copysign(INFINITY, x);
  int e = 0;
  std::frexp(a, &e);  // a = m * 2^e, m in [0.5, 1)
  const int ulp_exp = std::max(e - 1, -14) - 10;
  const double ulp = std::ldexp(1.0, ulp_exp);
  return static_cast<float>(std::copysign(std::nearbyint(a / ulp) * ulp, static_cast<double>(x)));
}

Tensor<float> fake_quant(const Tensor<float>& x, const QParams& q) {
  q.validate();
  Tensor<float> out(x.shape());
  if (q.bits == 16) {
    for (size_t i = 0; i < out.vec().size(); ++i) out.vec()[i] = round_to_fp16(x.vec()[i]);
  } else {
    for (size_t i = 0; i < out.vec().size(); ++i)
      out.vec()[i] = static_cast<float>(to_int8(x.vec()[i], q.scale) * q.scale);
  }
  return out;
}

std::string QMap::to_text() const {
  std::string s;
  char buf[64];
  auto line = [&](const std::string& name, const QParams& q) {
    std::snprintf(buf, sizeof buf, " %d %.17g\n", q.bits, q.scale);
    s += name + buf;
  };
  for (const auto& [k, q] : weights) line("weight:" + k, q);
  for (const auto& [k, q] : activations) line(k, q);
  return s;
}

QMap QMap::from_text(const std::string& text) {
  QMap m;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, rest;
    QParams q;
    if (!(ls >> name >> q.bits >> q.scale) || (ls >> rest))
      throw QuantConfigError("qmap line " + std::to_string(n) + ": expected 'site bits scale'");
    try {
      q.validate();
    } catch (const ParameterError& e) {
      throw QuantConfigError("qmap line " + std::to_string(n) + ": " + e.what());
    }
    if (first) m.bits = q.bits, first = false;
    if (q.bits != m.bits) throw QuantConfigError("qmap line " + std::to_string(n) + ": mixed bit widths");
    if (name.rfind("weight:", 0) == 0) m.weights[name.substr(7)] = q;
    else m.activations[name] = q;
  }
  return m;
}

QMap calibrate(const Model& model, const std::vector<Sample>& samples, int bits) {
  if (samples.empty()) throw ParameterError("calibrate: empty calibration set");
  QParams{1.0, bits}.validate();
  std::map<std::string, double> seen;
  EvalOptions opt;
  opt.configure = [&](Ctx& ctx) {
    ctx.site_hook = [&](const std::string& name, Var<float> x) {
      double& m = seen[name];
      m = std::max(m, max_abs(x.value()));
      return x;
    };
  };
  opt.input_transform = [&](const Tensor<float>& x) {
    double& m = seen[kInputSite];
    m = std::max(m, max_abs(x));
    return x;
  };
  evaluate(model, samples, opt);

  QMap q;
  q.bits = bits;
  for (const auto& [name, m] : seen) q.activations[name] = {int8_scale(m), bits};
  for (const auto& e : model.params.entries())
    if (e.kind == ParamKind::kWeight) q.weights[e.name] = {int8_scale(max_abs(e.value)), bits};
  return q;
}

void install_quantization(Ctx& ctx, const QMap& qmap) {
  ctx.site_hook = [&qmap](const std::string& name, Var<float> x) {
    const auto it = qmap.activations.find(name);
    if (it == qmap.activations.end()) throw QuantConfigError("no quantization parameters for site " + name);
    return constant(fake_quant(x.value(), it->second));
  };
  ctx.weight_transform = [&qmap](const ParamEntry& e) {
    if (e.kind != ParamKind::kWeight) return qmap.bits == 16 ? fake_quant(e.value, {1.0, 16}) : e.value;
    const auto it = qmap.weights.find(e.name);
    if (it == qmap.weights.end()) throw QuantConfigError("no quantization parameters for weight " + e.name);
    return fake_quant(e.value, it->second);
  };
}

EvalRun eval_quantized(const Model& model, const QMap& qmap, const std::vector<Sample>& samples,
                       EvalOptions options) {
  const auto input = qmap.activations.find(kInputSite);
  if (input == qmap.activations.end()) throw QuantConfigError("no quantization parameters for the input");
  const QParams qin = input->second;
  options.configure = [&qmap](Ctx& ctx) { install_quantization(ctx, qmap); };
  options.input_transform = [qin](const Tensor<float>& x) { return fake_quant(x, qin); };
  return evaluate(model, samples, options);
}

}  // namespace tln
