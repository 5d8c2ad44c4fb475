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

// Central finite-difference verification of analytic gradients at 64-bit.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tln/autograd.hpp"

namespace tln {

using GradFn = std::function<Var<double>(const std::vector<Var<double>>&)>;

/// Largest per-entry |analytic - numeric| / max(|analytic|, |numeric|, floor)
/// over all inputs. Non-scalar outputs are reduced with a fixed random
/// projection drawn from rng.
double max_relative_gradient_error(const GradFn& fn, const std::vector<Tensor<double>>& inputs,
                                   std::mt19937_64& rng, double step = 1e-5, double floor = 1e-3);

struct GradCheckResult {
  std::string op;
  int geometries = 0;
  double max_rel_error = 0.0;
  std::string worst_geometry;
  bool passed = false;
};

/// Runs every differentiable operation over randomized geometries.
std::vector<GradCheckResult> run_gradient_suite(int geometries_per_op = 20, uint64_t seed = 1,
                                                double tolerance = 1e-4);

}  // namespace tln
