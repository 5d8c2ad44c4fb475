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

#include "tln/context.hpp"

namespace tln {

Ctx::Ctx(const ParamStore& params, const ParamStore& buffers) : params_(params), buffers_ro_(buffers) {}

Ctx::Ctx(const ParamStore& params, ParamStore& buffers, Tape<float>* tape)
    : params_(params), buffers_ro_(buffers), buffers_rw_(&buffers), tape_(tape), training_(true) {}

Var<float> Ctx::param(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  const ParamEntry& e = params_.entry(name);
  Tensor<float> v = weight_transform ? weight_transform(e) : e.value;
  Var<float> var = tape_ ? tape_->leaf(std::move(v), name) : constant(std::move(v));
  cache_.emplace(name, var);
  return var;
}

BatchNormState<float> Ctx::norm_state(const std::string& prefix) {
  const std::string mean = prefix + ".running_mean", var = prefix + ".running_var";
  BatchNormState<float> st;
  st.eps = norm_eps;
  st.momentum = norm_momentum;
  if (buffers_rw_ != nullptr) {
    st.running_mean = &buffers_rw_->get(mean);
    st.running_var = &buffers_rw_->get(var);
  } else {
    st.running_mean = &(eval_stats_[mean] = buffers_ro_.get(mean));
    st.running_var = &(eval_stats_[var] = buffers_ro_.get(var));
  }
  return st;
}

Var<float> Ctx::site(const std::string& name, Var<float> x) {
  if (site_hook) x = site_hook(name, std::move(x));
  return x;
}

const Var<float>& Ctx::tag(const std::string& name, const Var<float>& x) {
  if (trace) trace->emplace_back(name, x.shape());
  return x;
}

}  // namespace tln
