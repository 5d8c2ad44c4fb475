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
#include <cstdint>
#include <utility>

namespace tln {

/// Nine (width, height) priors in input pixels, three per detection stride.
struct AnchorSet {
  std::array<std::array<std::pair<float, float>, 3>, 3> groups;

  static constexpr std::array<int64_t, 3> kStrides{8, 16, 32};

  /// Priors commonly used for 640-pixel road scenes.
  static AnchorSet defaults() {
    return {{{{{{10, 13}, {16, 30}, {33, 23}}},
              {{{30, 61}, {62, 45}, {59, 119}}},
              {{{116, 90}, {156, 198}, {373, 326}}}}}};
  }

  /// Positive dimensions, groups by ascending geometric-mean size, ascending
  /// area within a group.
  bool valid() const;
};

}  // namespace tln
