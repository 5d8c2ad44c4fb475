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

// Reverse-mode differentiation over a recorded tape.
//
// A Var is a handle to a node holding a value. Nodes created while a Tape is
// attached to any input are appended to that tape together with a backward
// closure; the append order is a topological order of the DAG. Vars created
// without a tape carry values only and are freed as soon as they go out of
// scope, which is how inference runs.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tln/tensor.hpp"

namespace tln {

template <class T>
class Tape;

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until first accumulation
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;  // reads this->grad, accumulates into inputs
  Tape<T>* tape = nullptr;
  std::string param_name;  // non-empty for named leaves

  /// Lazily allocates grad as zeros shaped like value.
  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t dim(size_t i) const { return node_->value.dim(i); }
  Tape<T>* tape() const { return node_ ? node_->tape : nullptr; }
  bool recording() const { return tape() != nullptr; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Constant (non-recorded) value.
template <class T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return Var<T>(std::move(n));
}

template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf. Named leaves are reported by backward().
  Var<T> leaf(Tensor<T> value, std::string name = {}) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->tape = this;
    n->param_name = std::move(name);
    nodes_.push_back(n);
    return Var<T>(std::move(n));
  }

  /// Appends a computed node. Used by operation implementations.
  Var<T> record(Tensor<T> value, std::vector<std::shared_ptr<Node<T>>> inputs,
                std::function<void(Node<T>&)> backward) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
    n->tape = this;
    nodes_.push_back(n);
    return Var<T>(std::move(n));
  }

  size_t size() const { return nodes_.size(); }
  const std::vector<std::shared_ptr<Node<T>>>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<Node<T>>> nodes_;
};

/// Gradients of a scalar root with respect to every named leaf on the tape.
/// Leaves not on any path to the root receive zero tensors.
template <class T>
std::map<std::string, Tensor<T>> backward(Tape<T>& tape, const Var<T>& root);

/// Gradient of the root with respect to an arbitrary recorded node, valid
/// after backward(); zeros when the node was not reached.
template <class T>
Tensor<T> grad_of(const Var<T>& v) {
  if (v.node()->grad.empty()) return Tensor<T>(v.shape());
  return v.node()->grad;
}

/// Picks the tape of the first recording input, or null.
template <class T>
Tape<T>* common_tape(std::initializer_list<const Var<T>*> vs) {
  Tape<T>* t = nullptr;
  for (const Var<T>* v : vs) {
    if (v == nullptr || !*v || v->tape() == nullptr) continue;
    if (t != nullptr && t != v->tape()) throw ParameterError("operands recorded on different tapes");
    t = v->tape();
  }
  return t;
}

}  // namespace tln
