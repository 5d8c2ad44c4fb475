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

#include <cmath>
#include <string>

#include "op_util.hpp"
#include "tln/ops.hpp"

namespace tln {
namespace {

constexpr int64_t kClasses = 2;
constexpr int64_t kCenters = 2 * kClasses;

struct PatchGrid {
  int64_t ph, pw, rows, cols;
  int64_t count() const { return rows * cols; }
};

PatchGrid patch_grid(int64_t h, int64_t w, int64_t patch) {
  return {patch, patch, (h + patch - 1) / patch, (w + patch - 1) / patch};
}

// Per-sample forward intermediates. Layouts are row-major with C innermost for
// centers so that dot products run over contiguous memory.
template <class T>
struct CcaForward {
  std::vector<T> pixel_w;  // (2, P) softmax of class logits inside each patch
  std::vector<T> local;    // (B, 2, C)
  std::vector<T> global;   // (2, C)
  std::vector<T> attn;     // (P, 4)
};

template <class T>
void cca_forward_sample(const T* x, const T* q, const T* logits, int64_t c, int64_t h, int64_t w,
                        const PatchGrid& g, CcaForward<T>& f, T* out) {
  const int64_t plane = h * w, nb = g.count();
  f.pixel_w.assign(static_cast<size_t>(kClasses * plane), T(0));
  f.local.assign(static_cast<size_t>(nb * kClasses * c), T(0));
  f.global.assign(static_cast<size_t>(kClasses * c), T(0));
  f.attn.assign(static_cast<size_t>(plane * kCenters), T(0));

  for (int64_t br = 0; br < g.rows; ++br)
    for (int64_t bc = 0; bc < g.cols; ++bc) {
      const int64_t b = br * g.cols + bc;
      const int64_t y0 = br * g.ph, y1 = std::min(h, y0 + g.ph);
      const int64_t x0 = bc * g.pw, x1 = std::min(w, x0 + g.pw);
      for (int64_t k = 0; k < kClasses; ++k) {
        const T* lk = logits + k * plane;
        T* ak = f.pixel_w.data() + k * plane;
        T mx = lk[y0 * w + x0];
        for (int64_t y = y0; y < y1; ++y)
          for (int64_t xx = x0; xx < x1; ++xx) mx = std::max(mx, lk[y * w + xx]);
        T z = T(0);
        for (int64_t y = y0; y < y1; ++y)
          for (int64_t xx = x0; xx < x1; ++xx) z += (ak[y * w + xx] = std::exp(lk[y * w + xx] - mx));
        T* ctr = f.local.data() + (b * kClasses + k) * c;
        for (int64_t y = y0; y < y1; ++y)
          for (int64_t xx = x0; xx < x1; ++xx) {
            const int64_t p = y * w + xx;
            ak[p] /= z;
            for (int64_t ch = 0; ch < c; ++ch) ctr[ch] += ak[p] * x[ch * plane + p];
          }
      }
    }
  for (int64_t b = 0; b < nb; ++b)
    for (int64_t i = 0; i < kClasses * c; ++i) f.global[i] += f.local[b * kClasses * c + i];
  for (auto& v : f.global) v /= static_cast<T>(nb);

  const T inv_sqrt_c = T(1) / std::sqrt(static_cast<T>(c));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t xx = 0; xx < w; ++xx) {
      const int64_t p = y * w + xx;
      const int64_t b = (y / g.ph) * g.cols + xx / g.pw;
      const T* ctr[kCenters] = {f.local.data() + b * kClasses * c, f.local.data() + (b * kClasses + 1) * c,
                                f.global.data(), f.global.data() + c};
      T s[kCenters];
      T mx = T(0);
      for (int64_t j = 0; j < kCenters; ++j) {
        T d = T(0);
        for (int64_t ch = 0; ch < c; ++ch) d += q[ch * plane + p] * ctr[j][ch];
        s[j] = d * inv_sqrt_c;
        mx = j == 0 ? s[j] : std::max(mx, s[j]);
      }
      T z = T(0);
      for (int64_t j = 0; j < kCenters; ++j) z += (s[j] = std::exp(s[j] - mx));
      T* a = f.attn.data() + p * kCenters;
      for (int64_t j = 0; j < kCenters; ++j) a[j] = s[j] / z;
      if (out)
        for (int64_t ch = 0; ch < c; ++ch) {
          T acc = T(0);
          for (int64_t j = 0; j < kCenters; ++j) acc += a[j] * ctr[j][ch];
          out[ch * plane + p] = acc;
        }
    }
}

template <class T>
void check_inputs(const Shape& xs, const Shape& qs, const Shape& ls, int64_t patch) {
  if (xs.rank() != 4 || qs != xs) throw ParameterError("class_center_attention: query must match features " + xs.str());
  if (ls.rank() != 4 || ls[0] != xs[0] || ls[1] != kClasses || ls[2] != xs[2] || ls[3] != xs[3])
    throw ParameterError("class_center_attention: class logits must be (N,2,H,W), got " + ls.str());
  if (patch < 1) throw ParameterError("class_center_attention: patch must be positive");
}

}  // namespace

template <class T>
Tensor<T> class_center_attention_weights(const Tensor<T>& x, const Tensor<T>& query, const Tensor<T>& class_logits,
                                         int64_t patch) {
  check_inputs<T>(x.shape(), query.shape(), class_logits.shape(), patch);
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), plane = h * w;
  const PatchGrid g = patch_grid(h, w, patch);
  Tensor<T> out(Shape{n, kCenters, h, w});
  CcaForward<T> f;
  for (int64_t i = 0; i < n; ++i) {
    cca_forward_sample(x.data() + i * c * plane, query.data() + i * c * plane,
                       class_logits.data() + i * kClasses * plane, c, h, w, g, f, static_cast<T*>(nullptr));
    for (int64_t p = 0; p < plane; ++p)
      for (int64_t j = 0; j < kCenters; ++j) out[(i * kCenters + j) * plane + p] = f.attn[p * kCenters + j];
  }
  return out;
}

template <class T>
Var<T> class_center_attention(const Var<T>& x, const Var<T>& query, const Var<T>& class_logits, int64_t patch) {
  if (!x || !query || !class_logits) throw ParameterError("class_center_attention: missing operand");
  check_inputs<T>(x.shape(), query.shape(), class_logits.shape(), patch);
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), plane = h * w;
  const PatchGrid g = patch_grid(h, w, patch);
  Tape<T>* tape = common_tape<T>({&x, &query, &class_logits});

  Tensor<T> out(x.shape());
  std::vector<CcaForward<T>> saved(tape ? static_cast<size_t>(n) : 1);
  for (int64_t i = 0; i < n; ++i)
    cca_forward_sample(x.value().data() + i * c * plane, query.value().data() + i * c * plane,
                       class_logits.value().data() + i * kClasses * plane, c, h, w, g,
                       saved[tape ? static_cast<size_t>(i) : 0], out.data() + i * c * plane);
  require_finite(out, "class_center_attention");
  if (!tape) return constant(std::move(out));

  auto xn = x.node(), qn = query.node(), ln = class_logits.node();
  return tape->record(std::move(out), {xn, qn, ln}, [=, saved = std::move(saved)](Node<T>& self) {
    const int64_t nb = g.count();
    const T inv_sqrt_c = T(1) / std::sqrt(static_cast<T>(c));
    Tensor<T> dx(xn->value.shape()), dq(qn->value.shape()), dl(ln->value.shape());
    std::vector<T> dlocal, dglobal;
    for (int64_t i = 0; i < n; ++i) {
      const CcaForward<T>& f = saved[static_cast<size_t>(i)];
      const T* xs = xn->value.data() + i * c * plane;
      const T* qs = qn->value.data() + i * c * plane;
      const T* go = self.grad.data() + i * c * plane;
      T* dxs = dx.data() + i * c * plane;
      T* dqs = dq.data() + i * c * plane;
      T* dls = dl.data() + i * kClasses * plane;
      dlocal.assign(static_cast<size_t>(nb * kClasses * c), T(0));
      dglobal.assign(static_cast<size_t>(kClasses * c), T(0));

      for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < w; ++xx) {
          const int64_t p = y * w + xx;
          const int64_t b = (y / g.ph) * g.cols + xx / g.pw;
          const T* ctr[kCenters] = {f.local.data() + b * kClasses * c, f.local.data() + (b * kClasses + 1) * c,
                                    f.global.data(), f.global.data() + c};
          T* dctr[kCenters] = {dlocal.data() + b * kClasses * c, dlocal.data() + (b * kClasses + 1) * c,
                               dglobal.data(), dglobal.data() + c};
          const T* a = f.attn.data() + p * kCenters;
          T da[kCenters], ds[kCenters];
          T mean_da = T(0);
          for (int64_t j = 0; j < kCenters; ++j) {
            T d = T(0);
            for (int64_t ch = 0; ch < c; ++ch) d += go[ch * plane + p] * ctr[j][ch];
            da[j] = d;
            mean_da += a[j] * d;
          }
          for (int64_t j = 0; j < kCenters; ++j) ds[j] = a[j] * (da[j] - mean_da) * inv_sqrt_c;
          for (int64_t ch = 0; ch < c; ++ch) {
            const T gch = go[ch * plane + p], qch = qs[ch * plane + p];
            T dqc = T(0);
            for (int64_t j = 0; j < kCenters; ++j) {
              dctr[j][ch] += a[j] * gch + ds[j] * qch;
              dqc += ds[j] * ctr[j][ch];
            }
            dqs[ch * plane + p] = dqc;
          }
        }

      for (int64_t b = 0; b < nb; ++b)
        for (int64_t k = 0; k < kClasses * c; ++k) dlocal[b * kClasses * c + k] += dglobal[k] / static_cast<T>(nb);

      for (int64_t br = 0; br < g.rows; ++br)
        for (int64_t bc = 0; bc < g.cols; ++bc) {
          const int64_t b = br * g.cols + bc;
          const int64_t y0 = br * g.ph, y1 = std::min(h, y0 + g.ph);
          const int64_t x0 = bc * g.pw, x1 = std::min(w, x0 + g.pw);
          for (int64_t k = 0; k < kClasses; ++k) {
            const T* dc = dlocal.data() + (b * kClasses + k) * c;
            const T* ak = f.pixel_w.data() + k * plane;
            T* dlk = dls + k * plane;
            T weighted = T(0);
            for (int64_t y = y0; y < y1; ++y)
              for (int64_t xx = x0; xx < x1; ++xx) {
                const int64_t p = y * w + xx;
                T dap = T(0);
                for (int64_t ch = 0; ch < c; ++ch) {
                  dxs[ch * plane + p] += ak[p] * dc[ch];
                  dap += dc[ch] * xs[ch * plane + p];
                }
                dlk[p] = dap;
                weighted += ak[p] * dap;
              }
            for (int64_t y = y0; y < y1; ++y)
              for (int64_t xx = x0; xx < x1; ++xx) {
                const int64_t p = y * w + xx;
                dlk[p] = ak[p] * (dlk[p] - weighted);
              }
          }
        }
    }
    if (detail::wants_grad(xn)) detail::accumulate(*xn, std::move(dx));
    if (detail::wants_grad(qn)) detail::accumulate(*qn, std::move(dq));
    if (detail::wants_grad(ln)) detail::accumulate(*ln, std::move(dl));
  });
}

template Var<float> class_center_attention(const Var<float>&, const Var<float>&, const Var<float>&, int64_t);
template Var<double> class_center_attention(const Var<double>&, const Var<double>&, const Var<double>&, int64_t);
template Tensor<float> class_center_attention_weights(const Tensor<float>&, const Tensor<float>&,
                                                      const Tensor<float>&, int64_t);
template Tensor<double> class_center_attention_weights(const Tensor<double>&, const Tensor<double>&,
                                                       const Tensor<double>&, int64_t);

}  // namespace tln
