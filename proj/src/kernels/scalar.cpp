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

#include "reference.hpp"

namespace tln::kernels {
namespace {

template <class T>
KernelTable<T> make_scalar_table() {
  KernelTable<T> t{};
  t.gemm = &ref::gemm<T>;
  t.depthwise_fwd = &ref::depthwise_fwd<T>;
  t.depthwise_bwd_data = &ref::depthwise_bwd_data<T>;
  t.depthwise_bwd_weight = &ref::depthwise_bwd_weight<T>;
  t.add_inplace = &ref::add_inplace<T>;
  t.scale_shift = &ref::scale_shift<T>;
  t.prelu = &ref::prelu<T>;
  return t;
}

}  // namespace

const KernelTable<float>& scalar_table_f32() {
  static const KernelTable<float> t = make_scalar_table<float>();
  return t;
}

const KernelTable<double>& scalar_table_f64() {
  static const KernelTable<double> t = make_scalar_table<double>();
  return t;
}

}  // namespace tln::kernels
