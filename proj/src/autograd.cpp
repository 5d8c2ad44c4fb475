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

#include "tln/autograd.hpp"

namespace tln {

template <class T>
std::map<std::string, Tensor<T>> backward(Tape<T>& tape, const Var<T>& root) {
  if (!root || root.value().numel() != 1) throw ParameterError("backward: root must be a scalar");
  if (root.tape() != &tape) throw ParameterError("backward: root was not recorded on this tape");

  root.node()->grad_buffer()[0] = T(1);
  const auto& nodes = tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    Node<T>& n = **it;
    if (!n.backward) continue;
    if (!n.grad.empty()) n.backward(n);
    // Every consumer of this node sits later on the tape and has already run,
    // so neither the gradient nor the value is needed any more.
    if (&n != root.node().get()) {
      n.grad = Tensor<T>();
      n.value = Tensor<T>();
    }
  }

  std::map<std::string, Tensor<T>> grads;
  for (const auto& n : nodes) {
    if (n->backward || n->param_name.empty()) continue;
    grads[n->param_name] = n->grad.empty() ? Tensor<T>(n->value.shape()) : n->grad;
  }
  return grads;
}

template std::map<std::string, Tensor<float>> backward(Tape<float>&, const Var<float>&);
template std::map<std::string, Tensor<double>> backward(Tape<double>&, const Var<double>&);

}  // namespace tln
