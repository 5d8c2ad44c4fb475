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

#include "tln/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "gradcheck_cases.hpp"
#include "tln/ops.hpp"

namespace tln {

double max_relative_gradient_error(const GradFn& fn, const std::vector<Tensor<double>>& inputs,
                                   std::mt19937_64& rng, double step, double floor) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  for (size_t i = 0; i < inputs.size(); ++i) leaves.push_back(tape.leaf(inputs[i], "in" + std::to_string(i)));
  Var<double> out = fn(leaves);

  // Fixed projection turns any output into a scalar loss.
  Tensor<double> proj;
  if (out.value().numel() != 1) {
    proj = Tensor<double>(out.shape());
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : proj.vec()) v = u(rng);
  }
  auto loss_of = [&](const Var<double>& y) {
    return proj.empty() ? y : sum(mul(y, constant(proj)));
  };
  auto grads = backward(tape, loss_of(out));

  std::vector<Var<double>> probe(inputs.size());
  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<double>& analytic = grads.at("in" + std::to_string(i));
    Tensor<double> x = inputs[i];
    for (int64_t k = 0; k < x.numel(); ++k) {
      const double saved = x[k];
      auto eval = [&](double v) {
        x[k] = v;
        for (size_t j = 0; j < inputs.size(); ++j) probe[j] = constant(j == i ? x : inputs[j]);
        return loss_of(fn(probe)).value()[0];
      };
      const double numeric = (eval(saved + step) - eval(saved - step)) / (2.0 * step);
      x[k] = saved;
      const double a = analytic[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

std::vector<GradCheckResult> run_gradient_suite(int geometries_per_op, uint64_t seed, double tolerance) {
  std::vector<GradCheckResult> results;
  std::mt19937_64 rng(seed);
  for (const auto& gc : gradcheck::all_cases()) {
    GradCheckResult r;
    r.op = gc.name;
    for (int g = 0; g < geometries_per_op; ++g) {
      gradcheck::Instance inst = gc.make(rng);
      const double err = max_relative_gradient_error(inst.fn, inst.inputs, rng);
      ++r.geometries;
      if (err >= r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_geometry = inst.geometry;
      }
    }
    r.passed = r.max_rel_error < tolerance;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace tln
