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

#include <map>
#include <string>
#include <vector>

#include "tln/tensor.hpp"

namespace tln {

/// Role of a stored tensor; the optimizer exempts everything but conv
/// weights from weight decay.
enum class ParamKind { kWeight, kBias, kNormScale, kNormShift, kSlope, kBuffer };

struct ParamEntry {
  std::string name;
  Tensor<float> value;
  ParamKind kind;
};

/// Named tensors in definition order.
class ParamStore {
 public:
  Tensor<float>& add(const std::string& name, Tensor<float> value, ParamKind kind);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor<float>& get(const std::string& name);
  const Tensor<float>& get(const std::string& name) const;
  const ParamEntry& entry(const std::string& name) const;

  size_t size() const { return entries_.size(); }
  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }

  /// Total element count.
  int64_t numel() const;

 private:
  std::vector<ParamEntry> entries_;
  std::map<std::string, size_t> index_;
};

}  // namespace tln
