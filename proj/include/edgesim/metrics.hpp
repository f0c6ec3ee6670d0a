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

#include <vector>

namespace edgesim {

// Area under the ROC curve as the Mann-Whitney rank statistic: the
// probability that a random positive outscores a random negative, ties
// crediting 0.5. Computed with average ranks, which matches brute-force
// pair counting exactly (every intermediate is an exact multiple of 0.5).
// Labels must be 0/1 with both classes present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace edgesim
