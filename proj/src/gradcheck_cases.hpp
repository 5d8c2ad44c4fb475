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

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tln/gradcheck.hpp"

namespace tln::gradcheck {

struct Instance {
  GradFn fn;
  std::vector<Tensor<double>> inputs;
  std::string geometry;
};

struct Case {
  std::string name;
  std::function<Instance(std::mt19937_64&)> make;
};

std::vector<Case> op_cases();
std::vector<Case> loss_cases();
std::vector<Case> all_cases();

// Helpers shared by the case generators.
int64_t pick_int(std::mt19937_64& rng, int64_t lo, int64_t hi);
Tensor<double> uniform(const Shape& s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);
Tensor<double> away_from_zero(const Shape& s, std::mt19937_64& rng, double margin = 0.05);

}  // namespace tln::gradcheck
