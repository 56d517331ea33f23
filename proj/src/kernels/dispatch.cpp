// Copyright (c) 2026 NEXcepTion Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "nexception/kernels/kernels.hpp"
#include "nexception/tensor.hpp"

namespace nex::kernels {

const char* isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

bool cpu_supports(Isa isa) {
  if (isa == Isa::kScalar) return true;
#if defined(__x86_64__) || defined(__i386__)
  if (avx2_table() == nullptr) return false;
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect_best() {
  if (const char* env = std::getenv("NEX_KERNELS"); env && std::strcmp(env, "scalar") == 0) {
    return Isa::kScalar;
  }
  return cpu_supports(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

namespace {

const KernelTable* table_for(Isa isa) { return isa == Isa::kAvx2 ? avx2_table() : &scalar_table(); }

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{table_for(detect_best())};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) {
  if (!cpu_supports(isa)) throw ConfigError(std::string("kernel variant not supported here: ") + isa_name(isa));
  current().store(table_for(isa), std::memory_order_relaxed);
}

}  // namespace nex::kernels
