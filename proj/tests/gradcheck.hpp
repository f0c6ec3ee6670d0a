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

#include <cmath>
#include <functional>
#include <string>

#include "edgesim/graph.hpp"

namespace edgesim::testutil {

// Builds the loss from scratch on a fresh tape. Must be a pure function of
// the store contents.
using LossFn = std::function<Value(Tape&, ParameterStore&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "param[i] analytic=.. numeric=.."
};

// Central finite differences with step eps against backward(). Relative
// error uses max(|analytic|, |numeric|) as the scale; when both are below
// floor the pair counts as matching (difference quotients lose all precision
// near zero).
inline GradCheckResult gradcheck(ParameterStore& store, const LossFn& fn, double eps = 1e-5,
                                 double floor = 1e-6) {
  GradCheckResult res;

  Tape tape(true);
  Value loss = fn(tape, store);
  GradientMap analytic = tape.backward(loss);

  const Tensor empty;
  for (auto& [name, p] : store.entries()) {
    // Parameters the graph never touched have an all-zero gradient.
    auto it = analytic.find(name);
    const Tensor& g = it == analytic.end() ? empty : it->second;
    for (int64_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];

      p[i] = saved + eps;
      Tape tp;
      const double fp = tp.scalar_value(fn(tp, store));

      p[i] = saved - eps;
      Tape tm;
      const double fm = tm.scalar_value(fn(tm, store));

      p[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = g.size() > 0 ? g[i] : 0.0;
      const double scale = std::max(std::abs(a), std::abs(numeric));
      if (scale < floor) continue;
      const double rel = std::abs(a - numeric) / scale;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = name + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) +
                    " numeric=" + std::to_string(numeric);
      }
    }
  }
  return res;
}

}  // namespace edgesim::testutil
