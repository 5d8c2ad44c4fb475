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

#include <algorithm>
#include <cstring>
#include <string>

#include "op_util.hpp"
#include "tln/ops.hpp"

namespace tln {
namespace {

using kernels::MatView;
using kernels::PlaneGeom;

// Bound on an im2col chunk, in elements.
constexpr int64_t kColBudget = int64_t{1} << 21;

int64_t rows_per_chunk(int64_t kdim, int64_t out_h, int64_t out_w) {
  const int64_t per_row = std::max<int64_t>(1, kdim * out_w);
  return std::clamp<int64_t>(kColBudget / per_row, 1, out_h);
}

// col[(c, ky, kx), (oy - oy0) * out_w + ox] for output rows [oy0, oy1).
template <class T>
void im2col(const T* x, int64_t channels, const PlaneGeom& g, int64_t oy0, int64_t oy1, T* col) {
  const int64_t np = (oy1 - oy0) * g.out_w;
  for (int64_t c = 0; c < channels; ++c) {
    const T* plane = x + c * g.in_h * g.in_w;
    for (int64_t ky = 0; ky < g.k_h; ++ky)
      for (int64_t kx = 0; kx < g.k_w; ++kx) {
        T* dst = col + ((c * g.k_h + ky) * g.k_w + kx) * np;
        for (int64_t oy = oy0; oy < oy1; ++oy) {
          const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
          T* drow = dst + (oy - oy0) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(drow, drow + g.out_w, T(0));
            continue;
          }
          const T* srow = plane + iy * g.in_w;
          for (int64_t ox = 0; ox < g.out_w; ++ox) {
            const int64_t ix = ox * g.stride_w - g.pad_w + kx * g.dil_w;
            drow[ox] = (ix >= 0 && ix < g.in_w) ? srow[ix] : T(0);
          }
        }
      }
  }
}

// Scatter-add of a column chunk back onto image planes (adjoint of im2col).
template <class T>
void col2im_add(const T* col, int64_t channels, const PlaneGeom& g, int64_t oy0, int64_t oy1, T* x) {
  const int64_t np = (oy1 - oy0) * g.out_w;
  for (int64_t c = 0; c < channels; ++c) {
    T* plane = x + c * g.in_h * g.in_w;
    for (int64_t ky = 0; ky < g.k_h; ++ky)
      for (int64_t kx = 0; kx < g.k_w; ++kx) {
        const T* src = col + ((c * g.k_h + ky) * g.k_w + kx) * np;
        for (int64_t oy = oy0; oy < oy1; ++oy) {
          const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* srow = src + (oy - oy0) * g.out_w;
          T* xrow = plane + iy * g.in_w;
          for (int64_t ox = 0; ox < g.out_w; ++ox) {
            const int64_t ix = ox * g.stride_w - g.pad_w + kx * g.dil_w;
            if (ix >= 0 && ix < g.in_w) xrow[ix] += srow[ox];
          }
        }
      }
  }
}

struct ConvPlan {
  int64_t n, cin, h, w, cout, cg, mg, groups;
  PlaneGeom g;
  bool depthwise;
  bool pointwise;  // 1x1, stride 1, no padding: im2col is the identity
  int64_t kdim() const { return cg * g.k_h * g.k_w; }
  int64_t in_plane() const { return h * w; }
  int64_t out_plane() const { return g.out_h * g.out_w; }
};

template <class T>
ConvPlan plan_conv(const Tensor<T>& x, const Tensor<T>& w, const ConvArgs& a) {
  if (x.rank() != 4 || w.rank() != 4) throw ParameterError("conv2d: expected NCHW input and 4-d weight");
  if (a.groups < 1 || a.stride[0] < 1 || a.stride[1] < 1 || a.dilation[0] < 1 || a.dilation[1] < 1 ||
      a.padding[0] < 0 || a.padding[1] < 0)
    throw ParameterError("conv2d: stride, dilation and groups must be positive, padding non-negative");
  ConvPlan p{};
  p.n = x.dim(0), p.cin = x.dim(1), p.h = x.dim(2), p.w = x.dim(3);
  p.cout = w.dim(0), p.groups = a.groups;
  if (p.cin % p.groups != 0 || p.cout % p.groups != 0)
    throw ParameterError("conv2d: channels not divisible by groups");
  p.cg = p.cin / p.groups, p.mg = p.cout / p.groups;
  if (w.dim(1) != p.cg)
    throw ParameterError("conv2d: weight expects " + std::to_string(w.dim(1) * p.groups) +
                         " input channels, got " + std::to_string(p.cin));
  const int64_t ext_h = a.dilation[0] * (w.dim(2) - 1) + 1, ext_w = a.dilation[1] * (w.dim(3) - 1) + 1;
  if (p.h + 2 * a.padding[0] < ext_h || p.w + 2 * a.padding[1] < ext_w)
    throw ParameterError("conv2d: dilated kernel larger than padded input");
  p.g = PlaneGeom{p.h,
                  p.w,
                  conv_out_extent(p.h, w.dim(2), a.stride[0], a.padding[0], a.dilation[0]),
                  conv_out_extent(p.w, w.dim(3), a.stride[1], a.padding[1], a.dilation[1]),
                  w.dim(2),
                  w.dim(3),
                  a.stride[0],
                  a.stride[1],
                  a.padding[0],
                  a.padding[1],
                  a.dilation[0],
                  a.dilation[1]};
  p.depthwise = p.groups == p.cin && p.cg == 1 && p.mg == 1;
  p.pointwise = w.dim(2) == 1 && w.dim(3) == 1 && a.stride[0] == 1 && a.stride[1] == 1 &&
                a.padding[0] == 0 && a.padding[1] == 0;
  return p;
}

template <class T>
void check_bias(const Var<T>& bias, int64_t channels, const char* op) {
  if (bias && (bias.value().rank() != 1 || bias.dim(0) != channels))
    throw ParameterError(std::string(op) + ": bias must have one entry per output channel");
}

template <class T>
void add_bias(Tensor<T>& out, const Tensor<T>& bias) {
  const int64_t n = out.dim(0), c = out.dim(1), plane = out.dim(2) * out.dim(3);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      T* p = out.data() + (i * c + ch) * plane;
      const T b = bias[ch];
      for (int64_t k = 0; k < plane; ++k) p[k] += b;
    }
}

template <class T>
Tensor<T> bias_grad(const Tensor<T>& dy) {
  const int64_t n = dy.dim(0), c = dy.dim(1), plane = dy.dim(2) * dy.dim(3);
  Tensor<T> db(Shape{c});
  for (int64_t ch = 0; ch < c; ++ch) {
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
      const T* p = dy.data() + (i * c + ch) * plane;
      for (int64_t k = 0; k < plane; ++k) acc += p[k];
    }
    db[ch] = acc;
  }
  return db;
}

template <class T>
Tensor<T> conv_forward(const Tensor<T>& x, const Tensor<T>& w, const ConvPlan& p) {
  const auto& kt = kernels::table<T>();
  Tensor<T> out(Shape{p.n, p.cout, p.g.out_h, p.g.out_w});
  const int64_t kd = p.kdim(), np = p.out_plane();
  std::vector<T> col;
  for (int64_t i = 0; i < p.n; ++i) {
    const T* xi = x.data() + i * p.cin * p.in_plane();
    T* oi = out.data() + i * p.cout * np;
    if (p.depthwise) {
      for (int64_t c = 0; c < p.cin; ++c)
        kt.depthwise_fwd(xi + c * p.in_plane(), w.data() + c * p.g.k_h * p.g.k_w, oi + c * np, p.g);
      continue;
    }
    for (int64_t gi = 0; gi < p.groups; ++gi) {
      const T* xg = xi + gi * p.cg * p.in_plane();
      const T* wg = w.data() + gi * p.mg * kd;
      T* og = oi + gi * p.mg * np;
      if (p.pointwise) {
        kt.gemm(p.mg, np, kd, MatView<T>{wg, kd, 1}, MatView<T>{xg, np, 1}, og, np, false);
        continue;
      }
      const int64_t rows = rows_per_chunk(kd, p.g.out_h, p.g.out_w);
      for (int64_t oy0 = 0; oy0 < p.g.out_h; oy0 += rows) {
        const int64_t oy1 = std::min(p.g.out_h, oy0 + rows), cp = (oy1 - oy0) * p.g.out_w;
        col.resize(static_cast<size_t>(kd * cp));
        im2col(xg, p.cg, p.g, oy0, oy1, col.data());
        kt.gemm(p.mg, cp, kd, MatView<T>{wg, kd, 1}, MatView<T>{col.data(), cp, 1}, og + oy0 * p.g.out_w,
                np, false);
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> conv_backward_data(const Tensor<T>& dy, const Tensor<T>& w, const ConvPlan& p) {
  const auto& kt = kernels::table<T>();
  Tensor<T> dx(Shape{p.n, p.cin, p.h, p.w});
  const int64_t kd = p.kdim(), np = p.out_plane();
  std::vector<T> col;
  for (int64_t i = 0; i < p.n; ++i) {
    T* dxi = dx.data() + i * p.cin * p.in_plane();
    const T* dyi = dy.data() + i * p.cout * np;
    if (p.depthwise) {
      for (int64_t c = 0; c < p.cin; ++c)
        kt.depthwise_bwd_data(dyi + c * np, w.data() + c * p.g.k_h * p.g.k_w, dxi + c * p.in_plane(), p.g);
      continue;
    }
    for (int64_t gi = 0; gi < p.groups; ++gi) {
      T* dxg = dxi + gi * p.cg * p.in_plane();
      const T* wg = w.data() + gi * p.mg * kd;
      const T* dyg = dyi + gi * p.mg * np;
      // W^T viewed as (kd x mg): element (r, c) = wg[c * kd + r].
      const MatView<T> wt{wg, 1, kd};
      if (p.pointwise) {
        kt.gemm(kd, np, p.mg, wt, MatView<T>{dyg, np, 1}, dxg, np, false);
        continue;
      }
      const int64_t rows = rows_per_chunk(kd, p.g.out_h, p.g.out_w);
      for (int64_t oy0 = 0; oy0 < p.g.out_h; oy0 += rows) {
        const int64_t oy1 = std::min(p.g.out_h, oy0 + rows), cp = (oy1 - oy0) * p.g.out_w;
        col.resize(static_cast<size_t>(kd * cp));
        kt.gemm(kd, cp, p.mg, wt, MatView<T>{dyg + oy0 * p.g.out_w, np, 1}, col.data(), cp, false);
        col2im_add(col.data(), p.cg, p.g, oy0, oy1, dxg);
      }
    }
  }
  return dx;
}

template <class T>
Tensor<T> conv_backward_weight(const Tensor<T>& x, const Tensor<T>& dy, const Tensor<T>& w,
                               const ConvPlan& p) {
  const auto& kt = kernels::table<T>();
  Tensor<T> dw(w.shape());
  const int64_t kd = p.kdim(), np = p.out_plane();
  std::vector<T> col;
  for (int64_t i = 0; i < p.n; ++i) {
    const T* xi = x.data() + i * p.cin * p.in_plane();
    const T* dyi = dy.data() + i * p.cout * np;
    if (p.depthwise) {
      for (int64_t c = 0; c < p.cin; ++c)
        kt.depthwise_bwd_weight(xi + c * p.in_plane(), dyi + c * np, dw.data() + c * p.g.k_h * p.g.k_w, p.g);
      continue;
    }
    for (int64_t gi = 0; gi < p.groups; ++gi) {
      const T* xg = xi + gi * p.cg * p.in_plane();
      const T* dyg = dyi + gi * p.mg * np;
      T* dwg = dw.data() + gi * p.mg * kd;
      if (p.pointwise) {
        kt.gemm(p.mg, kd, np, MatView<T>{dyg, np, 1}, MatView<T>{xg, 1, np}, dwg, kd, true);
        continue;
      }
      const int64_t rows = rows_per_chunk(kd, p.g.out_h, p.g.out_w);
      for (int64_t oy0 = 0; oy0 < p.g.out_h; oy0 += rows) {
        const int64_t oy1 = std::min(p.g.out_h, oy0 + rows), cp = (oy1 - oy0) * p.g.out_w;
        col.resize(static_cast<size_t>(kd * cp));
        im2col(xg, p.cg, p.g, oy0, oy1, col.data());
        kt.gemm(p.mg, kd, cp, MatView<T>{dyg + oy0 * p.g.out_w, np, 1}, MatView<T>{col.data(), 1, cp}, dwg,
                kd, true);
      }
    }
  }
  return dw;
}

thread_local uint64_t* g_mac_counter = nullptr;

void count_macs(int64_t macs) {
  if (g_mac_counter) *g_mac_counter += static_cast<uint64_t>(macs);
}

}  // namespace

MacCounterScope::MacCounterScope(uint64_t* counter) : prev_(g_mac_counter) { g_mac_counter = counter; }
MacCounterScope::~MacCounterScope() { g_mac_counter = prev_; }

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvArgs& args) {
  if (!x || !weight) throw ParameterError("conv2d: missing operand");
  const ConvPlan p = plan_conv(x.value(), weight.value(), args);
  check_bias(bias, p.cout, "conv2d");
  Tensor<T> out = conv_forward(x.value(), weight.value(), p);
  count_macs(p.n * p.cout * p.out_plane() * p.kdim());
  if (bias) add_bias(out, bias.value());
  require_finite(out, "conv2d");

  Tape<T>* tape = common_tape<T>({&x, &weight, &bias});
  if (!tape) return constant(std::move(out));
  auto xn = x.node(), wn = weight.node(), bn = bias ? bias.node() : nullptr;
  std::vector<std::shared_ptr<Node<T>>> inputs{xn, wn};
  if (bn) inputs.push_back(bn);
  return tape->record(std::move(out), std::move(inputs), [p, xn, wn, bn](Node<T>& self) {
    const Tensor<T>& dy = self.grad;
    if (detail::wants_grad(xn)) detail::accumulate(*xn, conv_backward_data(dy, wn->value, p));
    if (detail::wants_grad(wn)) detail::accumulate(*wn, conv_backward_weight(xn->value, dy, wn->value, p));
    if (detail::wants_grad(bn)) detail::accumulate(*bn, bias_grad(dy));
  });
}

namespace {

// Transposed convolution as the data-adjoint of a conv whose "input" is the
// transposed output. Weight (Cin, Cout, Kh, Kw) read as a (Cin x Cout*Kh*Kw) matrix.
struct TPlan {
  int64_t n, cin, h, w, cout;
  PlaneGeom g;  // conv geometry from the output plane (in_*) to the input plane (out_*)
  int64_t kdim() const { return cout * g.k_h * g.k_w; }
};

template <class T>
TPlan plan_tconv(const Tensor<T>& x, const Tensor<T>& w, IntPair stride, IntPair pad) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ParameterError("conv_transpose2d: expected NCHW input and 4-d weight");
  if (stride[0] < 1 || stride[1] < 1 || pad[0] < 0 || pad[1] < 0)
    throw ParameterError("conv_transpose2d: stride must be positive, padding non-negative");
  if (w.dim(0) != x.dim(1)) throw ParameterError("conv_transpose2d: weight/input channel mismatch");
  TPlan p{};
  p.n = x.dim(0), p.cin = x.dim(1), p.h = x.dim(2), p.w = x.dim(3), p.cout = w.dim(1);
  const int64_t oh = conv_transpose_out_extent(p.h, w.dim(2), stride[0], pad[0]);
  const int64_t ow = conv_transpose_out_extent(p.w, w.dim(3), stride[1], pad[1]);
  if (oh < 1 || ow < 1) throw ParameterError("conv_transpose2d: padding leaves an empty output");
  p.g = PlaneGeom{oh, ow, p.h, p.w, w.dim(2), w.dim(3), stride[0], stride[1], pad[0], pad[1], 1, 1};
  return p;
}

template <class T>
Tensor<T> tconv_forward(const Tensor<T>& x, const Tensor<T>& w, const TPlan& p) {
  const auto& kt = kernels::table<T>();
  const int64_t kd = p.kdim(), np = p.h * p.w, op = p.g.in_h * p.g.in_w;
  Tensor<T> out(Shape{p.n, p.cout, p.g.in_h, p.g.in_w});
  const int64_t rows = rows_per_chunk(kd, p.h, p.w);
  std::vector<T> col;
  for (int64_t i = 0; i < p.n; ++i) {
    const T* xi = x.data() + i * p.cin * np;
    T* oi = out.data() + i * p.cout * op;
    for (int64_t y0 = 0; y0 < p.h; y0 += rows) {
      const int64_t y1 = std::min(p.h, y0 + rows), cp = (y1 - y0) * p.w;
      col.resize(static_cast<size_t>(kd * cp));
      kt.gemm(kd, cp, p.cin, MatView<T>{w.data(), 1, kd}, MatView<T>{xi + y0 * p.w, np, 1}, col.data(), cp,
              false);
      col2im_add(col.data(), p.cout, p.g, y0, y1, oi);
    }
  }
  return out;
}

template <class T>
Tensor<T> tconv_backward_data(const Tensor<T>& dy, const Tensor<T>& w, const TPlan& p) {
  const auto& kt = kernels::table<T>();
  const int64_t kd = p.kdim(), np = p.h * p.w, op = p.g.in_h * p.g.in_w;
  Tensor<T> dx(Shape{p.n, p.cin, p.h, p.w});
  const int64_t rows = rows_per_chunk(kd, p.h, p.w);
  std::vector<T> col;
  for (int64_t i = 0; i < p.n; ++i) {
    const T* dyi = dy.data() + i * p.cout * op;
    T* dxi = dx.data() + i * p.cin * np;
    for (int64_t y0 = 0; y0 < p.h; y0 += rows) {
      const int64_t y1 = std::min(p.h, y0 + rows), cp = (y1 - y0) * p.w;
      col.resize(static_cast<size_t>(kd * cp));
      im2col(dyi, p.cout, p.g, y0, y1, col.data());
      kt.gemm(p.cin, cp, kd, MatView<T>{w.data(), kd, 1}, MatView<T>{col.data(), cp, 1}, dxi + y0 * p.w, np,
              false);
    }
  }
  return dx;
}

template <class T>
Tensor<T> tconv_backward_weight(const Tensor<T>& x, const Tensor<T>& dy, const Tensor<T>& w, const TPlan& p) {
  const auto& kt = kernels::table<T>();
  const int64_t kd = p.kdim(), np = p.h * p.w, op = p.g.in_h * p.g.in_w;
  Tensor<T> dw(w.shape());
  const int64_t rows = rows_per_chunk(kd, p.h, p.w);
  std::vector<T> col;
  for (int64_t i = 0; i < p.n; ++i) {
    const T* xi = x.data() + i * p.cin * np;
    const T* dyi = dy.data() + i * p.cout * op;
    for (int64_t y0 = 0; y0 < p.h; y0 += rows) {
      const int64_t y1 = std::min(p.h, y0 + rows), cp = (y1 - y0) * p.w;
      col.resize(static_cast<size_t>(kd * cp));
      im2col(dyi, p.cout, p.g, y0, y1, col.data());
      kt.gemm(p.cin, kd, cp, MatView<T>{xi + y0 * p.w, np, 1}, MatView<T>{col.data(), 1, cp}, dw.data(), kd,
              true);
    }
  }
  return dw;
}

}  // namespace

template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, IntPair stride,
                        IntPair padding) {
  if (!x || !weight) throw ParameterError("conv_transpose2d: missing operand");
  const TPlan p = plan_tconv(x.value(), weight.value(), stride, padding);
  check_bias(bias, p.cout, "conv_transpose2d");
  Tensor<T> out = tconv_forward(x.value(), weight.value(), p);
  count_macs(p.n * p.cin * p.h * p.w * p.kdim());
  if (bias) add_bias(out, bias.value());
  require_finite(out, "conv_transpose2d");

  Tape<T>* tape = common_tape<T>({&x, &weight, &bias});
  if (!tape) return constant(std::move(out));
  auto xn = x.node(), wn = weight.node(), bn = bias ? bias.node() : nullptr;
  std::vector<std::shared_ptr<Node<T>>> inputs{xn, wn};
  if (bn) inputs.push_back(bn);
  return tape->record(std::move(out), std::move(inputs), [p, xn, wn, bn](Node<T>& self) {
    const Tensor<T>& dy = self.grad;
    if (detail::wants_grad(xn)) detail::accumulate(*xn, tconv_backward_data(dy, wn->value, p));
    if (detail::wants_grad(wn)) detail::accumulate(*wn, tconv_backward_weight(xn->value, dy, wn->value, p));
    if (detail::wants_grad(bn)) detail::accumulate(*bn, bias_grad(dy));
  });
}

template Var<float> conv2d(const Var<float>&, const Var<float>&, const Var<float>&, const ConvArgs&);
template Var<double> conv2d(const Var<double>&, const Var<double>&, const Var<double>&, const ConvArgs&);
template Var<float> conv_transpose2d(const Var<float>&, const Var<float>&, const Var<float>&, IntPair,
                                     IntPair);
template Var<double> conv_transpose2d(const Var<double>&, const Var<double>&, const Var<double>&, IntPair,
                                      IntPair);

}  // namespace tln
