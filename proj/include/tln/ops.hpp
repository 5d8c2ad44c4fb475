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

// Differentiable operations on NCHW tensors. Every op validates its inputs,
// rejects non-finite results, and records a backward closure when any input
// is on a tape. Instantiated for float (model execution) and double
// (gradient checking).

#include <array>
#include <cstdint>
#include <vector>

#include "tln/autograd.hpp"

namespace tln {

using IntPair = std::array<int64_t, 2>;

struct ConvArgs {
  IntPair stride{1, 1};
  IntPair padding{0, 0};
  IntPair dilation{1, 1};
  int64_t groups = 1;
};

/// Output extent of a strided, padded, dilated window along one axis.
inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad, int64_t dil) {
  return (in + 2 * pad - dil * (k - 1) - 1) / stride + 1;
}

inline int64_t conv_transpose_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in - 1) * stride - 2 * pad + k;
}

/// Cross-correlation. weight is (Cout, Cin/groups, Kh, Kw); bias may be empty.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvArgs& args);

/// Adjoint of conv2d in its input. weight is (Cin, Cout, Kh, Kw).
template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, IntPair stride,
                        IntPair padding);

/// While alive, multiply-adds executed by conv2d and conv_transpose2d on the
/// current thread are added to *counter.
class MacCounterScope {
 public:
  explicit MacCounterScope(uint64_t* counter);
  ~MacCounterScope();
  MacCounterScope(const MacCounterScope&) = delete;
  MacCounterScope& operator=(const MacCounterScope&) = delete;

 private:
  uint64_t* prev_;
};

enum class PoolMode { kAvg, kMax };

template <class T>
Var<T> pool2d(const Var<T>& x, PoolMode mode, IntPair kernel, IntPair stride, IntPair padding);

template <class T>
Var<T> resample_nearest(const Var<T>& x, int64_t scale);

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <class T>
Var<T> concat_channels(const std::vector<Var<T>>& parts);

template <class T>
Var<T> sigmoid(const Var<T>& x);

template <class T>
Var<T> softmax_channels(const Var<T>& x);

/// Per-channel slope, shape (C).
template <class T>
Var<T> prelu(const Var<T>& x, const Var<T>& slope);

template <class T>
struct BatchNormState {
  Tensor<T>* running_mean = nullptr;  // (C); updated in training mode
  Tensor<T>* running_var = nullptr;   // (C)
  T eps = T(1e-5);
  T momentum = T(0.1);
};

/// Training mode normalizes with batch statistics and updates the running
/// statistics (unbiased variance); eval mode uses the stored statistics.
template <class T>
Var<T> batchnorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                 const BatchNormState<T>& state, bool training);

/// Sum of all elements, shape (1).
template <class T>
Var<T> sum(const Var<T>& x);

template <class T>
Var<T> scale(const Var<T>& x, T factor);

/// Element i of x as a shape-(1) value.
template <class T>
Var<T> pick(const Var<T>& x, int64_t index);

/// sum_i weights[i] * scalars[i]; each scalar has one element.
template <class T>
Var<T> linear_combination(const std::vector<Var<T>>& scalars, const std::vector<T>& weights);

/// Class-center attention over 2 pseudo-classes.
///   x: features (N,C,H,W); query: (N,C,H,W); class_logits: (N,2,H,W).
/// Within each non-overlapping patch, per-class softmax over pixels of the
/// class logits weights the features into a local center. Global centers are
/// the mean of local centers over patches. Every pixel attends with softmax
/// over {local_0, local_1, global_0, global_1} using query . center / sqrt(C)
/// and returns the weighted sum of centers, shape (N,C,H,W).
template <class T>
Var<T> class_center_attention(const Var<T>& x, const Var<T>& query, const Var<T>& class_logits,
                              int64_t patch);

/// Attention weights used by class_center_attention, shape (N,4,H,W).
template <class T>
Tensor<T> class_center_attention_weights(const Tensor<T>& x, const Tensor<T>& query,
                                         const Tensor<T>& class_logits, int64_t patch);

}  // namespace tln
