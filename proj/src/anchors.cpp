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

#include "tln/anchors.hpp"

#include <cmath>

namespace tln {

bool AnchorSet::valid() const {
  double prev_gm = 0.0;
  for (const auto& g : groups) {
    double log_sum = 0.0, prev_area = 0.0;
    for (const auto& [w, h] : g) {
      if (!(w > 0.f) || !(h > 0.f)) return false;
      const double area = double(w) * double(h);
      if (area < prev_area) return false;
      prev_area = area;
      log_sum += 0.5 * std::log(area);
    }
    const double gm = std::exp(log_sum / 3.0);
    if (gm < prev_gm) return false;
    prev_gm = gm;
  }
  return true;
}

}  // namespace tln
