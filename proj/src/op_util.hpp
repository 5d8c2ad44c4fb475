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

#include "tln/autograd.hpp"
#include "tln/kernels.hpp"

namespace tln::detail {

template <class T>
bool wants_grad(const Var<T>& v) {
  return v && v.tape() != nullptr;
}

template <class T>
bool wants_grad(const std::shared_ptr<Node<T>>& n) {
  return n && n->tape != nullptr;
}

/// grad(n) += delta, taking ownership of delta when the buffer is fresh.
template <class T>
void accumulate(Node<T>& n, Tensor<T>&& delta) {
  if (n.grad.empty()) {
    n.grad = std::move(delta);
  } else {
    kernels::table<T>().add_inplace(n.grad.data(), delta.data(), delta.numel());
  }
}

template <class T>
void require_nchw(const Var<T>& x, const char* op) {
  if (!x || x.value().rank() != 4) throw ParameterError(std::string(op) + ": expected an NCHW tensor");
}

}  // namespace tln::detail
