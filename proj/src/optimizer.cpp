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

#include "edgesim/optimizer.hpp"

#include "edgesim/kernels.hpp"

namespace edgesim {

void adagrad_step(ParameterStore& params, const GradientMap& grads, OptimizerState& state,
                  double lr, double decay) {
  const double lr_t = lr / (1.0 + decay * static_cast<double>(state.step));
  const auto& k = kern::active();

  for (auto& [name, p] : params.entries()) {
    auto git = grads.find(name);
    if (git == grads.end()) {
      fail("bad_argument", "adagrad_step: no gradient for parameter '" + name + "'");
    }
    const Tensor& g = git->second;
    if (!g.same_shape(p)) {
      fail("shape_mismatch",
           "adagrad_step: gradient " + g.shape_str() + " for parameter '" + name + "' " +
               p.shape_str());
    }
    if (!g.all_finite()) {
      fail("train_diverged", "non-finite gradient for parameter '" + name + "' at step " +
                                 std::to_string(state.step));
    }
    auto ait = state.accumulators.find(name);
    if (ait == state.accumulators.end()) {
      ait = state.accumulators.emplace(name, Tensor::zeros(p.rows(), p.cols())).first;
    }
    k.adagrad(p.data(), ait->second.data(), g.data(), lr_t, kAdagradEps,
              static_cast<size_t>(p.size()));
  }
  ++state.step;
}

}  // namespace edgesim
