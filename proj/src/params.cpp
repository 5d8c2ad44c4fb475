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

#include "tln/params.hpp"

namespace tln {

Tensor<float>& ParamStore::add(const std::string& name, Tensor<float> value, ParamKind kind) {
  if (name.empty()) throw ParameterError("parameter name must be non-empty");
  if (contains(name)) throw ParameterError("duplicate parameter name: " + name);
  index_[name] = entries_.size();
  entries_.push_back({name, std::move(value), kind});
  return entries_.back().value;
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("unknown parameter: " + name);
  return entries_[it->second];
}

Tensor<float>& ParamStore::get(const std::string& name) {
  return const_cast<ParamEntry&>(entry(name)).value;
}

const Tensor<float>& ParamStore::get(const std::string& name) const { return entry(name).value; }

int64_t ParamStore::numel() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

}  // namespace tln
