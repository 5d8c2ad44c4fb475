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

#include <atomic>
#include <cstdlib>
#include <string>

#include "tln/kernels.hpp"

namespace tln::kernels {
namespace {

Isa detect_default() {
  if (const char* env = std::getenv("TLN_ISA")) {
    if (std::string(env) == "scalar") return Isa::kScalar;
  }
  return (avx2_table_f32() != nullptr && cpu_has_avx2()) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect_default()};
  return isa;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::kAvx2 && (avx2_table_f32() == nullptr || !cpu_has_avx2())) isa = Isa::kScalar;
  active().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

template <>
const KernelTable<float>& table<float>() {
  if (active_isa() == Isa::kAvx2) return *avx2_table_f32();
  return scalar_table_f32();
}

}  // namespace tln::kernels
