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

// Compiled with -mavx2 -mfma. Only reached after a CPUID check.

#include "reference.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <vector>

namespace tln::kernels {
namespace {

constexpr int64_t kMr = 6;
constexpr int64_t kNr = 16;
constexpr int64_t kKc = 256;

// 6x16 register tile: acc[r] holds row r, two ymm per row.
inline void micro_kernel(int64_t kc, const float* ap, const float* bp, float* c, int64_t ldc,
                         bool load_c) {
  __m256 c00, c01, c10, c11, c20, c21, c30, c31, c40, c41, c50, c51;
  if (load_c) {
    c00 = _mm256_loadu_ps(c + 0 * ldc), c01 = _mm256_loadu_ps(c + 0 * ldc + 8);
    c10 = _mm256_loadu_ps(c + 1 * ldc), c11 = _mm256_loadu_ps(c + 1 * ldc + 8);
    c20 = _mm256_loadu_ps(c + 2 * ldc), c21 = _mm256_loadu_ps(c + 2 * ldc + 8);
    c30 = _mm256_loadu_ps(c + 3 * ldc), c31 = _mm256_loadu_ps(c + 3 * ldc + 8);
    c40 = _mm256_loadu_ps(c + 4 * ldc), c41 = _mm256_loadu_ps(c + 4 * ldc + 8);
    c50 = _mm256_loadu_ps(c + 5 * ldc), c51 = _mm256_loadu_ps(c + 5 * ldc + 8);
  } else {
    c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = c40 = c41 = c50 = c51 = _mm256_setzero_ps();
  }
  for (int64_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(bp + p * kNr);
    const __m256 b1 = _mm256_loadu_ps(bp + p * kNr + 8);
    const float* a = ap + p * kMr;
    __m256 av = _mm256_broadcast_ss(a + 0);
    c00 = _mm256_fmadd_ps(av, b0, c00), c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(a + 1);
    c10 = _mm256_fmadd_ps(av, b0, c10), c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(a + 2);
    c20 = _mm256_fmadd_ps(av, b0, c20), c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(a + 3);
    c30 = _mm256_fmadd_ps(av, b0, c30), c31 = _mm256_fmadd_ps(av, b1, c31);
    av = _mm256_broadcast_ss(a + 4);
    c40 = _mm256_fmadd_ps(av, b0, c40), c41 = _mm256_fmadd_ps(av, b1, c41);
    av = _mm256_broadcast_ss(a + 5);
    c50 = _mm256_fmadd_ps(av, b0, c50), c51 = _mm256_fmadd_ps(av, b1, c51);
  }
  _mm256_storeu_ps(c + 0 * ldc, c00), _mm256_storeu_ps(c + 0 * ldc + 8, c01);
  _mm256_storeu_ps(c + 1 * ldc, c10), _mm256_storeu_ps(c + 1 * ldc + 8, c11);
  _mm256_storeu_ps(c + 2 * ldc, c20), _mm256_storeu_ps(c + 2 * ldc + 8, c21);
  _mm256_storeu_ps(c + 3 * ldc, c30), _mm256_storeu_ps(c + 3 * ldc + 8, c31);
  _mm256_storeu_ps(c + 4 * ldc, c40), _mm256_storeu_ps(c + 4 * ldc + 8, c41);
  _mm256_storeu_ps(c + 5 * ldc, c50), _mm256_storeu_ps(c + 5 * ldc + 8, c51);
}

void gemm_avx2(int64_t m, int64_t n, int64_t k, MatView<float> a, MatView<float> b, float* c,
               int64_t ldc, bool accumulate) {
  if (m <= 0 || n <= 0) return;
  if (k <= 0) {
    if (!accumulate)
      for (int64_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0f);
    return;
  }
  const int64_t m_pad = (m + kMr - 1) / kMr * kMr;
  thread_local std::vector<float> apack, bpack;
  apack.resize(static_cast<size_t>(m_pad * kKc));
  bpack.resize(static_cast<size_t>(kKc * kNr));
  float tile[kMr * kNr];

  for (int64_t k0 = 0; k0 < k; k0 += kKc) {
    const int64_t kc = std::min(kKc, k - k0);
    const bool load_c = accumulate || k0 > 0;
    // Pack A[:, k0:k0+kc] as m_pad/kMr panels of (kc x kMr), zero-padding rows.
    for (int64_t i0 = 0; i0 < m_pad; i0 += kMr) {
      float* dst = apack.data() + i0 * kc;
      for (int64_t p = 0; p < kc; ++p)
        for (int64_t r = 0; r < kMr; ++r) {
          const int64_t i = i0 + r;
          dst[p * kMr + r] = i < m ? a.ptr[i * a.rs + (k0 + p) * a.cs] : 0.0f;
        }
    }
    for (int64_t j0 = 0; j0 < n; j0 += kNr) {
      const int64_t nr = std::min(kNr, n - j0);
      float* bp = bpack.data();
      for (int64_t p = 0; p < kc; ++p) {
        const float* src = b.ptr + (k0 + p) * b.rs + j0 * b.cs;
        float* dst = bp + p * kNr;
        if (b.cs == 1) {
          std::memcpy(dst, src, static_cast<size_t>(nr) * sizeof(float));
        } else {
          for (int64_t j = 0; j < nr; ++j) dst[j] = src[j * b.cs];
        }
        for (int64_t j = nr; j < kNr; ++j) dst[j] = 0.0f;
      }
      for (int64_t i0 = 0; i0 < m; i0 += kMr) {
        const int64_t mr = std::min(kMr, m - i0);
        float* cblk = c + i0 * ldc + j0;
        const float* ap = apack.data() + i0 * kc;
        if (mr == kMr && nr == kNr) {
          micro_kernel(kc, ap, bp, cblk, ldc, load_c);
        } else {
          if (load_c) {
            for (int64_t r = 0; r < mr; ++r)
              for (int64_t j = 0; j < nr; ++j) tile[r * kNr + j] = cblk[r * ldc + j];
          }
          micro_kernel(kc, ap, bp, tile, kNr, load_c);
          for (int64_t r = 0; r < mr; ++r)
            for (int64_t j = 0; j < nr; ++j) cblk[r * ldc + j] = tile[r * kNr + j];
        }
      }
    }
  }
}

void depthwise_fwd_avx2(const float* in, const float* w, float* out, const PlaneGeom& g) {
  if (g.stride_w != 1) {
    ref::depthwise_fwd(in, w, out, g);
    return;
  }
  int64_t lo, hi;
  ref::interior_cols(g, lo, hi);
  for (int64_t oy = 0; oy < g.out_h; ++oy) {
    float* orow = out + oy * g.out_w;
    for (int64_t ox = 0; ox < lo; ++ox) orow[ox] = ref::depthwise_point(in, w, g, oy, ox);
    int64_t ox = lo;
    for (; ox + 8 <= hi; ox += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (int64_t ky = 0; ky < g.k_h; ++ky) {
        const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
        if (iy < 0 || iy >= g.in_h) continue;
        const float* irow = in + iy * g.in_w + ox - g.pad_w;
        for (int64_t kx = 0; kx < g.k_w; ++kx) {
          const __m256 wv = _mm256_set1_ps(w[ky * g.k_w + kx]);
          acc = _mm256_fmadd_ps(wv, _mm256_loadu_ps(irow + kx * g.dil_w), acc);
        }
      }
      _mm256_storeu_ps(orow + ox, acc);
    }
    for (; ox < g.out_w; ++ox) orow[ox] = ref::depthwise_point(in, w, g, oy, ox);
  }
}

void depthwise_bwd_data_avx2(const float* dy, const float* w, float* dx, const PlaneGeom& g) {
  if (g.stride_w != 1) {
    ref::depthwise_bwd_data(dy, w, dx, g);
    return;
  }
  for (int64_t oy = 0; oy < g.out_h; ++oy)
    for (int64_t ky = 0; ky < g.k_h; ++ky) {
      const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
      if (iy < 0 || iy >= g.in_h) continue;
      for (int64_t kx = 0; kx < g.k_w; ++kx) {
        // ox range whose ix = ox - p + kx*d falls inside [0, in_w).
        const int64_t shift = kx * g.dil_w - g.pad_w;
        const int64_t lo = std::max<int64_t>(0, -shift);
        const int64_t hi = std::min<int64_t>(g.out_w, g.in_w - shift);
        if (lo >= hi) continue;
        const __m256 wv = _mm256_set1_ps(w[ky * g.k_w + kx]);
        const float* drow = dy + oy * g.out_w;
        float* xrow = dx + iy * g.in_w;
        int64_t ox = lo;
        for (; ox + 8 <= hi; ox += 8) {
          const __m256 d = _mm256_loadu_ps(xrow + ox + shift);
          _mm256_storeu_ps(xrow + ox + shift, _mm256_fmadd_ps(wv, _mm256_loadu_ps(drow + ox), d));
        }
        ref::depthwise_bwd_data_row(dy, w, dx, g, oy, ky, kx, ox, hi);
      }
    }
}

inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

void depthwise_bwd_weight_avx2(const float* in, const float* dy, float* dw, const PlaneGeom& g) {
  if (g.stride_w != 1) {
    ref::depthwise_bwd_weight(in, dy, dw, g);
    return;
  }
  for (int64_t ky = 0; ky < g.k_h; ++ky)
    for (int64_t kx = 0; kx < g.k_w; ++kx) {
      const int64_t shift = kx * g.dil_w - g.pad_w;
      const int64_t lo = std::max<int64_t>(0, -shift);
      const int64_t hi = std::min<int64_t>(g.out_w, g.in_w - shift);
      __m256 vacc = _mm256_setzero_ps();
      float tail = 0.0f;
      for (int64_t oy = 0; oy < g.out_h; ++oy) {
        const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
        if (iy < 0 || iy >= g.in_h) continue;
        const float* drow = dy + oy * g.out_w;
        const float* irow = in + iy * g.in_w;
        int64_t ox = lo;
        for (; ox + 8 <= hi; ox += 8)
          vacc = _mm256_fmadd_ps(_mm256_loadu_ps(drow + ox), _mm256_loadu_ps(irow + ox + shift), vacc);
        for (; ox < hi; ++ox) tail = std::fma(drow[ox], irow[ox + shift], tail);
      }
      dw[ky * g.k_w + kx] += hsum(vacc) + tail;
    }
}

void add_inplace_avx2(float* y, const float* x, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  ref::add_inplace(y + i, x + i, n - i);
}

void scale_shift_avx2(const float* x, float* y, int64_t n, float scale, float shift) {
  const __m256 s = _mm256_set1_ps(scale), b = _mm256_set1_ps(shift);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_fmadd_ps(_mm256_loadu_ps(x + i), s, b));
  ref::scale_shift(x + i, y + i, n - i, scale, shift);
}

void prelu_avx2(const float* x, float* y, int64_t n, float slope) {
  const __m256 s = _mm256_set1_ps(slope), zero = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 neg = _mm256_mul_ps(v, s);
    const __m256 keep = _mm256_cmp_ps(v, zero, _CMP_GE_OQ);
    _mm256_storeu_ps(y + i, _mm256_blendv_ps(neg, v, keep));
  }
  ref::prelu(x + i, y + i, n - i, slope);
}

}  // namespace

const KernelTable<float>* avx2_table_f32() {
  static const KernelTable<float> t = [] {
    KernelTable<float> k{};
    k.gemm = &gemm_avx2;
    k.depthwise_fwd = &depthwise_fwd_avx2;
    k.depthwise_bwd_data = &depthwise_bwd_data_avx2;
    k.depthwise_bwd_weight = &depthwise_bwd_weight_avx2;
    k.add_inplace = &add_inplace_avx2;
    k.scale_shift = &scale_shift_avx2;
    k.prelu = &prelu_avx2;
    return k;
  }();
  return &t;
}

}  // namespace tln::kernels

#else

namespace tln::kernels {
const KernelTable<float>* avx2_table_f32() { return nullptr; }
}  // namespace tln::kernels

#endif
