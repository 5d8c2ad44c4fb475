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
#include <limits>
#include <string>

#include "op_util.hpp"
#include "tln/ops.hpp"

namespace tln {

using detail::accumulate;
using detail::wants_grad;

// ---------------------------------------------------------------- pooling

template <class T>
Var<T> pool2d(const Var<T>& x, PoolMode mode, IntPair kernel, IntPair stride, IntPair padding) {
  detail::require_nchw(x, "pool2d");
  if (kernel[0] < 1 || kernel[1] < 1 || stride[0] < 1 || stride[1] < 1 || padding[0] < 0 || padding[1] < 0)
    throw ParameterError("pool2d: kernel and stride must be positive, padding non-negative");
  const Tensor<T>& in = x.value();
  const int64_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  if (h + 2 * padding[0] < kernel[0] || w + 2 * padding[1] < kernel[1])
    throw ParameterError("pool2d: kernel larger than padded input");
  const int64_t oh = conv_out_extent(h, kernel[0], stride[0], padding[0], 1);
  const int64_t ow = conv_out_extent(w, kernel[1], stride[1], padding[1], 1);
  Tensor<T> out(Shape{n, c, oh, ow});
  std::vector<int64_t> argmax;
  if (mode == PoolMode::kMax) argmax.resize(static_cast<size_t>(out.numel()));
  const T inv_area = T(1) / static_cast<T>(kernel[0] * kernel[1]);

  for (int64_t p = 0; p < n * c; ++p) {
    const T* src = in.data() + p * h * w;
    T* dst = out.data() + p * oh * ow;
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox) {
        const int64_t y0 = oy * stride[0] - padding[0], x0 = ox * stride[1] - padding[1];
        if (mode == PoolMode::kAvg) {
          T acc = T(0);
          for (int64_t ky = 0; ky < kernel[0]; ++ky) {
            const int64_t iy = y0 + ky;
            if (iy < 0 || iy >= h) continue;
            for (int64_t kx = 0; kx < kernel[1]; ++kx) {
              const int64_t ix = x0 + kx;
              if (ix >= 0 && ix < w) acc += src[iy * w + ix];
            }
          }
          dst[oy * ow + ox] = acc * inv_area;
        } else {
          T best = -std::numeric_limits<T>::infinity();
          int64_t best_i = -1;
          for (int64_t ky = 0; ky < kernel[0]; ++ky) {
            const int64_t iy = y0 + ky;
            if (iy < 0 || iy >= h) continue;
            for (int64_t kx = 0; kx < kernel[1]; ++kx) {
              const int64_t ix = x0 + kx;
              if (ix < 0 || ix >= w) continue;
              if (src[iy * w + ix] > best || best_i < 0) best = src[iy * w + ix], best_i = iy * w + ix;
            }
          }
          if (best_i < 0) throw ParameterError("pool2d: window contains only padding");
          dst[oy * ow + ox] = best;
          argmax[static_cast<size_t>(p * oh * ow + oy * ow + ox)] = best_i;
        }
      }
  }
  require_finite(out, "pool2d");
  Tape<T>* tape = x.tape();
  if (!tape) return constant(std::move(out));
  auto xn = x.node();
  return tape->record(std::move(out), {xn},
                      [=, argmax = std::move(argmax)](Node<T>& self) {
                        Tensor<T> dx(Shape{n, c, h, w});
                        const Tensor<T>& dy = self.grad;
                        for (int64_t p = 0; p < n * c; ++p) {
                          T* d = dx.data() + p * h * w;
                          const T* g = dy.data() + p * oh * ow;
                          for (int64_t oy = 0; oy < oh; ++oy)
                            for (int64_t ox = 0; ox < ow; ++ox) {
                              const T go = g[oy * ow + ox];
                              if (mode == PoolMode::kMax) {
                                d[argmax[static_cast<size_t>(p * oh * ow + oy * ow + ox)]] += go;
                                continue;
                              }
                              const int64_t y0 = oy * stride[0] - padding[0], x0 = ox * stride[1] - padding[1];
                              for (int64_t ky = 0; ky < kernel[0]; ++ky) {
                                const int64_t iy = y0 + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int64_t kx = 0; kx < kernel[1]; ++kx) {
                                  const int64_t ix = x0 + kx;
                                  if (ix >= 0 && ix < w) d[iy * w + ix] += go * inv_area;
                                }
                              }
                            }
                        }
                        accumulate(*xn, std::move(dx));
                      });
}

// --------------------------------------------------------------- resample

template <class T>
Var<T> resample_nearest(const Var<T>& x, int64_t s) {
  detail::require_nchw(x, "resample_nearest");
  if (s < 1) throw ParameterError("resample_nearest: scale must be >= 1");
  const Tensor<T>& in = x.value();
  const int64_t nc = in.dim(0) * in.dim(1), h = in.dim(2), w = in.dim(3);
  Tensor<T> out(Shape{in.dim(0), in.dim(1), h * s, w * s});
  for (int64_t p = 0; p < nc; ++p) {
    const T* src = in.data() + p * h * w;
    T* dst = out.data() + p * h * w * s * s;
    for (int64_t y = 0; y < h * s; ++y)
      for (int64_t xx = 0; xx < w * s; ++xx) dst[y * w * s + xx] = src[(y / s) * w + xx / s];
  }
  Tape<T>* tape = x.tape();
  if (!tape) return constant(std::move(out));
  auto xn = x.node();
  return tape->record(std::move(out), {xn}, [=](Node<T>& self) {
    Tensor<T> dx(xn->value.shape());
    for (int64_t p = 0; p < nc; ++p) {
      T* d = dx.data() + p * h * w;
      const T* g = self.grad.data() + p * h * w * s * s;
      for (int64_t y = 0; y < h * s; ++y)
        for (int64_t xx = 0; xx < w * s; ++xx) d[(y / s) * w + xx / s] += g[y * w * s + xx];
    }
    accumulate(*xn, std::move(dx));
  });
}

// ------------------------------------------------------------- elementwise

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a || !b || a.shape() != b.shape())
    throw ParameterError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor<T> out = a.value();
  kernels::table<T>().add_inplace(out.data(), b.value().data(), out.numel());
  require_finite(out, "add");
  Tape<T>* tape = common_tape<T>({&a, &b});
  if (!tape) return constant(std::move(out));
  auto an = a.node(), bn = b.node();
  return tape->record(std::move(out), {an, bn}, [an, bn](Node<T>& self) {
    if (wants_grad(an)) accumulate(*an, Tensor<T>(self.grad));
    if (wants_grad(bn)) accumulate(*bn, Tensor<T>(self.grad));
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  if (!a || !b || a.shape() != b.shape())
    throw ParameterError("mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  require_finite(out, "mul");
  Tape<T>* tape = common_tape<T>({&a, &b});
  if (!tape) return constant(std::move(out));
  auto an = a.node(), bn = b.node();
  return tape->record(std::move(out), {an, bn}, [an, bn](Node<T>& self) {
    const int64_t n = self.grad.numel();
    if (wants_grad(an)) {
      Tensor<T> d(an->value.shape());
      for (int64_t i = 0; i < n; ++i) d[i] = self.grad[i] * bn->value[i];
      accumulate(*an, std::move(d));
    }
    if (wants_grad(bn)) {
      Tensor<T> d(bn->value.shape());
      for (int64_t i = 0; i < n; ++i) d[i] = self.grad[i] * an->value[i];
      accumulate(*bn, std::move(d));
    }
  });
}

template <class T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ParameterError("concat_channels: no inputs");
  for (const auto& p : parts) detail::require_nchw(p, "concat_channels");
  const Shape& s0 = parts[0].shape();
  int64_t ctot = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != s0[0] || p.dim(2) != s0[2] || p.dim(3) != s0[3])
      throw ParameterError("concat_channels: non-channel dims differ " + s0.str() + " vs " + p.shape().str());
    ctot += p.dim(1);
  }
  const int64_t n = s0[0], plane = s0[2] * s0[3];
  Tensor<T> out(Shape{n, ctot, s0[2], s0[3]});
  for (int64_t i = 0; i < n; ++i) {
    T* dst = out.data() + i * ctot * plane;
    for (const auto& p : parts) {
      const int64_t len = p.dim(1) * plane;
      std::copy_n(p.value().data() + i * len, len, dst);
      dst += len;
    }
  }
  Tape<T>* tape = nullptr;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& p : parts) {
    if (p.tape()) {
      if (tape && tape != p.tape()) throw ParameterError("concat_channels: operands on different tapes");
      tape = p.tape();
    }
    nodes.push_back(p.node());
  }
  if (!tape) return constant(std::move(out));
  return tape->record(std::move(out), nodes, [nodes, n, ctot, plane](Node<T>& self) {
    int64_t coff = 0;
    for (const auto& pn : nodes) {
      const int64_t cp = pn->value.dim(1);
      if (wants_grad(pn)) {
        Tensor<T> d(pn->value.shape());
        for (int64_t i = 0; i < n; ++i)
          std::copy_n(self.grad.data() + (i * ctot + coff) * plane, cp * plane, d.data() + i * cp * plane);
        accumulate(*pn, std::move(d));
      }
      coff += cp;
    }
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  if (!x) throw ParameterError("sigmoid: missing operand");
  Tensor<T> out(x.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-x.value()[i]));
  Tape<T>* tape = x.tape();
  if (!tape) return constant(std::move(out));
  auto xn = x.node();
  return tape->record(std::move(out), {xn}, [xn](Node<T>& self) {
    Tensor<T> d(self.value.shape());
    for (int64_t i = 0; i < d.numel(); ++i) d[i] = self.grad[i] * self.value[i] * (T(1) - self.value[i]);
    accumulate(*xn, std::move(d));
  });
}

template <class T>
Var<T> softmax_channels(const Var<T>& x) {
  detail::require_nchw(x, "softmax_channels");
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<T> out(x.shape());
  const T* src = x.value().data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t p = 0; p < plane; ++p) {
      const int64_t base = i * c * plane + p;
      T mx = src[base];
      for (int64_t ch = 1; ch < c; ++ch) mx = std::max(mx, src[base + ch * plane]);
      T z = T(0);
      for (int64_t ch = 0; ch < c; ++ch) z += (out[base + ch * plane] = std::exp(src[base + ch * plane] - mx));
      for (int64_t ch = 0; ch < c; ++ch) out[base + ch * plane] /= z;
    }
  Tape<T>* tape = x.tape();
  if (!tape) return constant(std::move(out));
  auto xn = x.node();
  return tape->record(std::move(out), {xn}, [xn, n, c, plane](Node<T>& self) {
    Tensor<T> d(self.value.shape());
    for (int64_t i = 0; i < n; ++i)
      for (int64_t p = 0; p < plane; ++p) {
        const int64_t base = i * c * plane + p;
        T dot = T(0);
        for (int64_t ch = 0; ch < c; ++ch) dot += self.value[base + ch * plane] * self.grad[base + ch * plane];
        for (int64_t ch = 0; ch < c; ++ch)
          d[base + ch * plane] = self.value[base + ch * plane] * (self.grad[base + ch * plane] - dot);
      }
    accumulate(*xn, std::move(d));
  });
}

template <class T>
Var<T> prelu(const Var<T>& x, const Var<T>& slope) {
  detail::require_nchw(x, "prelu");
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (!slope || slope.value().rank() != 1 || slope.dim(0) != c)
    throw ParameterError("prelu: slope must have one entry per channel");
  const auto& kt = kernels::table<T>();
  Tensor<T> out(x.shape());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t off = (i * c + ch) * plane;
      kt.prelu(x.value().data() + off, out.data() + off, plane, slope.value()[ch]);
    }
  require_finite(out, "prelu");
  Tape<T>* tape = common_tape<T>({&x, &slope});
  if (!tape) return constant(std::move(out));
  auto xn = x.node(), sn = slope.node();
  return tape->record(std::move(out), {xn, sn}, [xn, sn, n, c, plane](Node<T>& self) {
    const T* xv = xn->value.data();
    const T* g = self.grad.data();
    if (wants_grad(xn)) {
      Tensor<T> d(xn->value.shape());
      for (int64_t i = 0; i < n; ++i)
        for (int64_t ch = 0; ch < c; ++ch) {
          const int64_t off = (i * c + ch) * plane;
          const T a = sn->value[ch];
          for (int64_t k = 0; k < plane; ++k) d[off + k] = xv[off + k] >= T(0) ? g[off + k] : a * g[off + k];
        }
      accumulate(*xn, std::move(d));
    }
    if (wants_grad(sn)) {
      Tensor<T> d(sn->value.shape());
      for (int64_t ch = 0; ch < c; ++ch) {
        T acc = T(0);
        for (int64_t i = 0; i < n; ++i) {
          const int64_t off = (i * c + ch) * plane;
          for (int64_t k = 0; k < plane; ++k)
            if (xv[off + k] < T(0)) acc += g[off + k] * xv[off + k];
        }
        d[ch] = acc;
      }
      accumulate(*sn, std::move(d));
    }
  });
}

// -------------------------------------------------------------- batchnorm

template <class T>
Var<T> batchnorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const BatchNormState<T>& st,
                 bool training) {
  detail::require_nchw(x, "batchnorm");
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const int64_t count = n * plane;
  if (!gamma || !beta || gamma.shape() != Shape{c} || beta.shape() != Shape{c})
    throw ParameterError("batchnorm: gamma/beta must have one entry per channel");
  if (!st.running_mean || !st.running_var || st.running_mean->shape() != Shape{c} ||
      st.running_var->shape() != Shape{c})
    throw ParameterError("batchnorm: running statistics must have one entry per channel");
  if (training && count < 2) throw ParameterError("batchnorm: training mode needs more than one value per channel");

  const T* xv = x.value().data();
  std::vector<T> mean(static_cast<size_t>(c)), invstd(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch) {
    if (training) {
      double s = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const T* p = xv + (i * c + ch) * plane;
        for (int64_t k = 0; k < plane; ++k) s += static_cast<double>(p[k]);
      }
      const double m = s / static_cast<double>(count);
      double ss = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const T* p = xv + (i * c + ch) * plane;
        for (int64_t k = 0; k < plane; ++k) {
          const double d = static_cast<double>(p[k]) - m;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      mean[ch] = static_cast<T>(m);
      invstd[ch] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(st.eps)));
      T& rm = (*st.running_mean)[ch];
      T& rv = (*st.running_var)[ch];
      rm = (T(1) - st.momentum) * rm + st.momentum * static_cast<T>(m);
      rv = (T(1) - st.momentum) * rv +
           st.momentum * static_cast<T>(ss / static_cast<double>(count - 1));
    } else {
      mean[ch] = (*st.running_mean)[ch];
      const T denom = std::sqrt((*st.running_var)[ch] + st.eps);
      if (!(denom > T(0))) throw ParameterError("batchnorm: zero variance with zero epsilon");
      invstd[ch] = T(1) / denom;
    }
  }

  const auto& kt = kernels::table<T>();
  Tensor<T> out(x.shape());
  for (int64_t ch = 0; ch < c; ++ch) {
    const T a = gamma.value()[ch] * invstd[ch];
    const T b = beta.value()[ch] - mean[ch] * a;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t off = (i * c + ch) * plane;
      kt.scale_shift(xv + off, out.data() + off, plane, a, b);
    }
  }
  require_finite(out, "batchnorm");

  Tape<T>* tape = common_tape<T>({&x, &gamma, &beta});
  if (!tape) return constant(std::move(out));
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return tape->record(
      std::move(out), {xn, gn, bn},
      [xn, gn, bn, n, c, plane, count, training, mean = std::move(mean), invstd = std::move(invstd)](Node<T>& self) {
        const T* g = self.grad.data();
        const T* xs = xn->value.data();
        Tensor<T> dx(xn->value.shape()), dgamma(Shape{c}), dbeta(Shape{c});
        for (int64_t ch = 0; ch < c; ++ch) {
          double sg = 0.0, sgx = 0.0;
          for (int64_t i = 0; i < n; ++i) {
            const int64_t off = (i * c + ch) * plane;
            for (int64_t k = 0; k < plane; ++k) {
              const double xhat = (static_cast<double>(xs[off + k]) - mean[ch]) * invstd[ch];
              sg += g[off + k];
              sgx += g[off + k] * xhat;
            }
          }
          dbeta[ch] = static_cast<T>(sg);
          dgamma[ch] = static_cast<T>(sgx);
          const double gm = gn->value[ch];
          for (int64_t i = 0; i < n; ++i) {
            const int64_t off = (i * c + ch) * plane;
            for (int64_t k = 0; k < plane; ++k) {
              if (training) {
                const double xhat = (static_cast<double>(xs[off + k]) - mean[ch]) * invstd[ch];
                const double m = static_cast<double>(count);
                dx[off + k] = static_cast<T>(gm * invstd[ch] / m * (m * g[off + k] - sg - xhat * sgx));
              } else {
                dx[off + k] = static_cast<T>(gm * invstd[ch] * g[off + k]);
              }
            }
          }
        }
        if (wants_grad(xn)) accumulate(*xn, std::move(dx));
        if (wants_grad(gn)) accumulate(*gn, std::move(dgamma));
        if (wants_grad(bn)) accumulate(*bn, std::move(dbeta));
      });
}

// ------------------------------------------------------------- reductions

template <class T>
Var<T> sum(const Var<T>& x) {
  if (!x) throw ParameterError("sum: missing operand");
  T acc = T(0);
  for (const T v : x.value().vec()) acc += v;
  Tensor<T> out(Shape{1}, acc);
  require_finite(out, "sum");
  Tape<T>* tape = x.tape();
  if (!tape) return constant(std::move(out));
  auto xn = x.node();
  return tape->record(std::move(out), {xn},
                      [xn](Node<T>& self) { accumulate(*xn, Tensor<T>(xn->value.shape(), self.grad[0])); });
}

template <class T>
Var<T> scale(const Var<T>& x, T factor) {
  if (!x) throw ParameterError("scale: missing operand");
  Tensor<T> out = x.value();
  for (auto& v : out.vec()) v *= factor;
  require_finite(out, "scale");
  Tape<T>* tape = x.tape();
  if (!tape) return constant(std::move(out));
  auto xn = x.node();
  return tape->record(std::move(out), {xn}, [xn, factor](Node<T>& self) {
    Tensor<T> d = self.grad;
    for (auto& v : d.vec()) v *= factor;
    accumulate(*xn, std::move(d));
  });
}

template <class T>
Var<T> pick(const Var<T>& x, int64_t index) {
  if (!x || index < 0 || index >= x.value().numel()) throw ParameterError("pick: index out of range");
  Tensor<T> out(Shape{1}, x.value()[index]);
  Tape<T>* tape = x.tape();
  if (!tape) return constant(std::move(out));
  auto xn = x.node();
  return tape->record(std::move(out), {xn}, [xn, index](Node<T>& self) {
    Tensor<T> d(xn->value.shape());
    d[index] = self.grad[0];
    accumulate(*xn, std::move(d));
  });
}

template <class T>
Var<T> linear_combination(const std::vector<Var<T>>& scalars, const std::vector<T>& weights) {
  if (scalars.size() != weights.size() || scalars.empty())
    throw ParameterError("linear_combination: need one weight per scalar");
  T acc = T(0);
  Tape<T>* tape = nullptr;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (size_t i = 0; i < scalars.size(); ++i) {
    if (!scalars[i] || scalars[i].value().numel() != 1)
      throw ParameterError("linear_combination: operands must be scalars");
    acc += weights[i] * scalars[i].value()[0];
    if (scalars[i].tape()) tape = scalars[i].tape();
    nodes.push_back(scalars[i].node());
  }
  Tensor<T> out(Shape{1}, acc);
  require_finite(out, "linear_combination");
  if (!tape) return constant(std::move(out));
  return tape->record(std::move(out), nodes, [nodes, weights](Node<T>& self) {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (wants_grad(nodes[i])) accumulate(*nodes[i], Tensor<T>(Shape{1}, weights[i] * self.grad[0]));
  });
}

#define TLN_INSTANTIATE(T)                                                                      \
  template Var<T> pool2d(const Var<T>&, PoolMode, IntPair, IntPair, IntPair);                    \
  template Var<T> resample_nearest(const Var<T>&, int64_t);                                      \
  template Var<T> add(const Var<T>&, const Var<T>&);                                             \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                             \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                                   \
  template Var<T> sigmoid(const Var<T>&);                                                        \
  template Var<T> softmax_channels(const Var<T>&);                                               \
  template Var<T> prelu(const Var<T>&, const Var<T>&);                                           \
  template Var<T> batchnorm(const Var<T>&, const Var<T>&, const Var<T>&, const BatchNormState<T>&, \
                            bool);                                                               \
  template Var<T> sum(const Var<T>&);                                                            \
  template Var<T> scale(const Var<T>&, T);                                                       \
  template Var<T> pick(const Var<T>&, int64_t);                                                  \
  template Var<T> linear_combination(const std::vector<Var<T>>&, const std::vector<T>&);

TLN_INSTANTIATE(float)
TLN_INSTANTIATE(double)
#undef TLN_INSTANTIATE

}  // namespace tln
