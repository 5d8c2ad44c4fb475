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

// Portable reference implementations. The AVX2 translation unit reuses these
// for tails and borders, so they must keep the accumulation order documented
// in kernels.hpp.

#include <cmath>
#include <cstdint>

#include "tln/kernels.hpp"

namespace tln::kernels::ref {

template <class T>
void gemm(int64_t m, int64_t n, int64_t k, MatView<T> a, MatView<T> b, T* c, int64_t ldc,
          bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (!accumulate)
      for (int64_t j = 0; j < n; ++j) crow[j] = T(0);
    for (int64_t p = 0; p < k; ++p) {
      const T aip = a.ptr[i * a.rs + p * a.cs];
      const T* brow = b.ptr + p * b.rs;
      if (b.cs == 1) {
        for (int64_t j = 0; j < n; ++j) crow[j] = std::fma(aip, brow[j], crow[j]);
      } else {
        for (int64_t j = 0; j < n; ++j) crow[j] = std::fma(aip, brow[j * b.cs], crow[j]);
      }
    }
  }
}

/// Output columns [lo, hi) for which every horizontal tap lands inside the row.
inline void interior_cols(const PlaneGeom& g, int64_t& lo, int64_t& hi) {
  // ox*s - p >= 0  and  ox*s - p + (kw-1)*d <= in_w - 1
  lo = (g.pad_w + g.stride_w - 1) / g.stride_w;
  const int64_t last = g.in_w - 1 - (g.k_w - 1) * g.dil_w + g.pad_w;
  hi = last < 0 ? 0 : last / g.stride_w + 1;
  if (hi > g.out_w) hi = g.out_w;
  if (lo > hi) lo = hi;
}

template <class T>
inline T depthwise_point(const T* in, const T* w, const PlaneGeom& g, int64_t oy, int64_t ox) {
  T acc = T(0);
  for (int64_t ky = 0; ky < g.k_h; ++ky) {
    const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
    if (iy < 0 || iy >= g.in_h) continue;
    for (int64_t kx = 0; kx < g.k_w; ++kx) {
      const int64_t ix = ox * g.stride_w - g.pad_w + kx * g.dil_w;
      if (ix < 0 || ix >= g.in_w) continue;
      acc = std::fma(w[ky * g.k_w + kx], in[iy * g.in_w + ix], acc);
    }
  }
  return acc;
}

template <class T>
void depthwise_fwd(const T* in, const T* w, T* out, const PlaneGeom& g) {
  for (int64_t oy = 0; oy < g.out_h; ++oy)
    for (int64_t ox = 0; ox < g.out_w; ++ox) out[oy * g.out_w + ox] = depthwise_point(in, w, g, oy, ox);
}

// Loop order (oy, ky, kx, ox): each dx element receives at most one
// contribution per (oy, ky, kx), which lets the vector variant match exactly.
template <class T>
void depthwise_bwd_data_row(const T* dy, const T* w, T* dx, const PlaneGeom& g, int64_t oy,
                            int64_t ky, int64_t kx, int64_t ox_lo, int64_t ox_hi) {
  const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
  const T wk = w[ky * g.k_w + kx];
  for (int64_t ox = ox_lo; ox < ox_hi; ++ox) {
    const int64_t ix = ox * g.stride_w - g.pad_w + kx * g.dil_w;
    if (ix < 0 || ix >= g.in_w) continue;
    T& d = dx[iy * g.in_w + ix];
    d = std::fma(wk, dy[oy * g.out_w + ox], d);
  }
}

template <class T>
void depthwise_bwd_data(const T* dy, const T* w, T* dx, const PlaneGeom& g) {
  for (int64_t oy = 0; oy < g.out_h; ++oy)
    for (int64_t ky = 0; ky < g.k_h; ++ky) {
      const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
      if (iy < 0 || iy >= g.in_h) continue;
      for (int64_t kx = 0; kx < g.k_w; ++kx) depthwise_bwd_data_row(dy, w, dx, g, oy, ky, kx, 0, g.out_w);
    }
}

template <class T>
void depthwise_bwd_weight(const T* in, const T* dy, T* dw, const PlaneGeom& g) {
  for (int64_t ky = 0; ky < g.k_h; ++ky)
    for (int64_t kx = 0; kx < g.k_w; ++kx) {
      T acc = T(0);
      for (int64_t oy = 0; oy < g.out_h; ++oy) {
        const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
        if (iy < 0 || iy >= g.in_h) continue;
        for (int64_t ox = 0; ox < g.out_w; ++ox) {
          const int64_t ix = ox * g.stride_w - g.pad_w + kx * g.dil_w;
          if (ix < 0 || ix >= g.in_w) continue;
          acc = std::fma(dy[oy * g.out_w + ox], in[iy * g.in_w + ix], acc);
        }
      }
      dw[ky * g.k_w + kx] += acc;
    }
}

template <class T>
void add_inplace(T* y, const T* x, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += x[i];
}

template <class T>
void scale_shift(const T* x, T* y, int64_t n, T scale, T shift) {
  for (int64_t i = 0; i < n; ++i) y[i] = std::fma(x[i], scale, shift);
}

template <class T>
void prelu(const T* x, T* y, int64_t n, T slope) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] >= T(0) ? x[i] : slope * x[i];
}

}  // namespace tln::kernels::ref
