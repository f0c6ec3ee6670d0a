/*
 * Copyright 2026 The EdgeSim Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdlib>
#include <string>

#include "edgesim/error.hpp"
#include "edgesim/kernels.hpp"

namespace edgesim::kern {
namespace {

const Kernels* g_active = nullptr;

const Kernels* resolve(const std::string& name) {
  if (name == "scalar") return &scalar_kernels();
  if (name == "avx2") {
    const Kernels* k = avx2_kernels();
    if (!k) fail("unsupported_kernel", "avx2 kernels unavailable on this CPU/build");
    return k;
  }
  if (name == "auto" || name.empty()) {
    const Kernels* k = avx2_kernels();
    return k ? k : &scalar_kernels();
  }
  fail("unsupported_kernel", "unknown kernel implementation '" + name + "'");
}

}  // namespace

const Kernels& active() {
  if (!g_active) {
    const char* env = std::getenv("EDGESIM_KERNELS");
    g_active = resolve(env ? env : "auto");
  }
  return *g_active;
}

void select(const char* name) { g_active = resolve(name ? name : "auto"); }

}  // namespace edgesim::kern
