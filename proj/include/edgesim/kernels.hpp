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
#pragma once

#include <cstddef>

namespace edgesim::kern {

// Dense double-precision inner loops behind the tensor ops. Two
// implementations: a scalar reference and an AVX2 variant, selected once at
// startup (EDGESIM_KERNELS=scalar|avx2|auto overrides autodetection).
//
// Bit-compatibility contract between implementations:
//   add/sub/mul/scale/axpy/relu/adagrad : bit-identical (lane-parallel IEEE
//                                          ops, no FMA, same per-element order)
//   matmul_nn/matmul_tn                 : bit-identical (k-outer accumulation,
//                                          lanes run over the n axis)
//   dot/sum/matmul_nt                   : reduction order differs (blocked
//                                          accumulators); equivalence-tested to
//                                          1e-13 relative instead
struct Kernels {
  const char* name;

  void (*add)(const double* a, const double* b, double* out, size_t n);
  void (*sub)(const double* a, const double* b, double* out, size_t n);
  void (*mul)(const double* a, const double* b, double* out, size_t n);
  void (*scale)(const double* a, double s, double* out, size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, size_t n);
  void (*relu)(const double* a, double* out, size_t n);

  double (*dot)(const double* a, const double* b, size_t n);
  double (*sum)(const double* a, size_t n);

  // C(m,n) += A(m,k) * B(k,n); all row-major, C must be initialized.
  void (*matmul_nn)(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
  // C(m,n) += A(m,k) * B(n,k)^T
  void (*matmul_nt)(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);
  // C(k,n) += A(m,k)^T * B(m,n)
  void (*matmul_tn)(const double* a, const double* b, double* c, size_t m, size_t k, size_t n);

  // acc += g*g; p -= lr * g / (sqrt(acc) + eps)
  void (*adagrad)(double* p, double* acc, const double* g, double lr, double eps, size_t n);
};

const Kernels& scalar_kernels();

// nullptr when AVX2 is not compiled in or the CPU lacks it.
const Kernels* avx2_kernels();

// The active table. First call resolves EDGESIM_KERNELS; defaults to the
// fastest available implementation.
const Kernels& active();

// Force an implementation by name ("scalar", "avx2", "auto"). Throws
// Error("unsupported_kernel") if unavailable.
void select(const char* name);

}  // namespace edgesim::kern
