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

#include <cstdint>
#include <map>
#include <string>

#include "edgesim/graph.hpp"

namespace edgesim {

// Per-parameter squared-gradient accumulators plus the completed step count.
// Accumulators never decrease.
struct OptimizerState {
  std::map<std::string, Tensor> accumulators;
  int64_t step = 0;
};

// Adagrad with an optional hyperbolic learning-rate decay:
//   lr_t = lr / (1 + decay * t),   t = completed steps before this one
//   acc += g^2
//   p   -= lr_t * g / (sqrt(acc) + 1e-8)
// decay = 0 is plain Adagrad (the default everywhere).
//
// grads must cover every parameter in the store with matching shapes. A
// non-finite gradient aborts with Error("train_diverged").
void adagrad_step(ParameterStore& params, const GradientMap& grads, OptimizerState& state,
                  double lr, double decay = 0.0);

inline constexpr double kAdagradEps = 1e-8;

}  // namespace edgesim
