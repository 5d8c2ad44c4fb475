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

// Inner-loop kernels. Every kernel has a portable scalar reference and, for
// float, an AVX2+FMA variant chosen once at startup from CPUID. Both variants
// accumulate each output element in the same order with fused multiply-add,
// so gemm, depthwise_conv_fwd and the elementwise kernels agree bit-for-bit;
// reductions over pixels (depthwise weight gradients) agree to rounding.

#include <cstdint>
#include <string_view>

namespace tln::kernels {

enum class Isa { kScalar, kAvx2 };

/// Strided matrix view: element (r, c) lives at ptr[r * rs + c * cs].
template <class T>
struct MatView {
  const T* ptr;
  int64_t rs;
  int64_t cs;
};

/// Convolution geometry for a single (channel, image) plane.
struct PlaneGeom {
  int64_t in_h, in_w, out_h, out_w;
  int64_t k_h, k_w;
  int64_t stride_h, stride_w;
  int64_t pad_h, pad_w;
  int64_t dil_h, dil_w;
};

template <class T>
struct KernelTable {
  /// C[m, n] = (accumulate ? C[m, n] : 0) + sum_k A[m, k] * B[k, n], k ascending.
  /// C is dense row-major with leading dimension ldc.
  void (*gemm)(int64_t m, int64_t n, int64_t k, MatView<T> a, MatView<T> b, T* c, int64_t ldc,
               bool accumulate);
  /// out[oy, ox] = sum_{ky,kx} w[ky, kx] * in[oy*s - p + ky*d, ox*s - p + kx*d]; no bias.
  void (*depthwise_fwd)(const T* in, const T* w, T* out, const PlaneGeom& g);
  /// dx += scatter of dy through w (adjoint of depthwise_fwd in the input).
  void (*depthwise_bwd_data)(const T* dy, const T* w, T* dx, const PlaneGeom& g);
  /// dw[ky, kx] += sum over output pixels of dy * shifted input.
  void (*depthwise_bwd_weight)(const T* in, const T* dy, T* dw, const PlaneGeom& g);
  /// y[i] += x[i]
  void (*add_inplace)(T* y, const T* x, int64_t n);
  /// y[i] = x[i] * scale + shift
  void (*scale_shift)(const T* x, T* y, int64_t n, T scale, T shift);
  /// y[i] = x[i] >= 0 ? x[i] : slope * x[i]
  void (*prelu)(const T* x, T* y, int64_t n, T slope);
};

const KernelTable<float>& scalar_table_f32();
const KernelTable<double>& scalar_table_f64();
/// Null when the binary was built without AVX2 support.
const KernelTable<float>* avx2_table_f32();

bool cpu_has_avx2();

/// Active ISA. Defaults to the best supported; TLN_ISA=scalar forces the
/// reference path.
Isa active_isa();
void set_active_isa(Isa isa);
std::string_view isa_name(Isa isa);

template <class T>
const KernelTable<T>& table();

template <>
inline const KernelTable<double>& table<double>() {
  return scalar_table_f64();
}

template <>
const KernelTable<float>& table<float>();

}  // namespace tln::kernels
