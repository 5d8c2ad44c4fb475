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

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace tln::detail {

/// Forward-mode value with N partial derivatives.
template <int N>
struct Dual {
  double v = 0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: constants promote implicitly
  static Dual variable(double value, int i) {
    Dual r(value);
    r.d[i] = 1.0;
    return r;
  }
};

template <int N>
Dual<N> operator+(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v + b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
template <int N>
Dual<N> operator-(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v - b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
template <int N>
Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v * b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
template <int N>
Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v / b.v);
  for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) / b.v;
  return r;
}
template <int N>
Dual<N> atan(const Dual<N>& a) {
  Dual<N> r(std::atan(a.v));
  const double s = 1.0 / (1.0 + a.v * a.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * s;
  return r;
}
template <int N>
Dual<N> sigmoid(const Dual<N>& a) {
  Dual<N> r(1.0 / (1.0 + std::exp(-a.v)));
  const double s = r.v * (1.0 - r.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * s;
  return r;
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.v;
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
using std::atan;

/// Selects the operand with the larger value (the derivative follows it).
template <class S>
S max_of(const S& a, const S& b) {
  return value_of(a) >= value_of(b) ? a : b;
}
template <class S>
S min_of(const S& a, const S& b) {
  return value_of(a) <= value_of(b) ? a : b;
}

template <class S>
struct BoxT {
  S x1, y1, x2, y2;
};

/// IoU, or CIoU = IoU - rho^2/c^2 - alpha*v. A zero-area box has IoU 0 and
/// only the center-distance penalty.
template <class S>
S iou_impl(const BoxT<S>& a, const BoxT<S>& b, bool ciou) {
  const S wa = a.x2 - a.x1, ha = a.y2 - a.y1, wb = b.x2 - b.x1, hb = b.y2 - b.y1;
  const bool degenerate = !(value_of(wa) > 0 && value_of(ha) > 0 && value_of(wb) > 0 && value_of(hb) > 0);
  S iou(0.0);
  if (!degenerate) {
    const S iw = max_of(S(0.0), min_of(a.x2, b.x2) - max_of(a.x1, b.x1));
    const S ih = max_of(S(0.0), min_of(a.y2, b.y2) - max_of(a.y1, b.y1));
    const S inter = iw * ih;
    iou = inter / (wa * ha + wb * hb - inter);
  }
  if (!ciou) return iou;
  const S cw = max_of(a.x2, b.x2) - min_of(a.x1, b.x1);
  const S ch = max_of(a.y2, b.y2) - min_of(a.y1, b.y1);
  const S c2 = cw * cw + ch * ch;
  if (!(value_of(c2) > 0)) return iou;
  const S dx = (b.x1 + b.x2 - a.x1 - a.x2) * S(0.5), dy = (b.y1 + b.y2 - a.y1 - a.y2) * S(0.5);
  S out = iou - (dx * dx + dy * dy) / c2;
  if (degenerate) return out;
  const S da = atan(wb / hb) - atan(wa / ha);
  const S v = S(4.0 / (std::numbers::pi * std::numbers::pi)) * da * da;
  const S denom = S(1.0) - iou + v;
  if (value_of(v) > 0 && value_of(denom) > 0) out = out - v / denom * v;
  return out;
}

}  // namespace tln::detail
