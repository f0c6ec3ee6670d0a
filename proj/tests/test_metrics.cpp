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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "edgesim/error.hpp"
#include "edgesim/metrics.hpp"
#include "edgesim/rng.hpp"

using namespace edgesim;

namespace {

// Reference implementation: walk every positive-negative pair.
double auc_brute(const std::vector<double>& scores, const std::vector<int>& labels) {
  double credit = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        credit += 1.0;
      } else if (scores[i] == scores[j]) {
        credit += 0.5;
      }
    }
  }
  return credit / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auc worked examples") {
  CHECK(auc({0.9, 0.1}, {1, 0}) == 1.0);
  CHECK(auc({0.1, 0.9}, {1, 0}) == 0.0);
  CHECK(auc({0.4, 0.4, 0.4}, {1, 0, 1}) == 0.5);
  // Four pos-neg pairs: 1 + 1 + 0.5 + 1 = 3.5 credits.
  CHECK(auc({0.8, 0.6, 0.6, 0.2}, {1, 1, 0, 0}) == 0.875);
}

TEST_CASE("auc equals brute-force pair counting on random instances") {
  Rng rng(derive_seed(2024, "auc-oracle"));
  int checked = 0;
  while (checked < 100) {
    const int n = 2 + static_cast<int>(rng.below(39));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      // Coarse grid forces plenty of ties.
      scores[i] = static_cast<double>(rng.below(8)) / 7.0;
      labels[i] = rng.below(2) == 0 ? 0 : 1;
      pos += labels[i];
    }
    if (pos == 0 || pos == n) continue;
    ++checked;
    CHECK(auc(scores, labels) == auc_brute(scores, labels));
  }
}

TEST_CASE("auc input validation") {
  CHECK_THROWS_WITH_AS(auc({0.5, 0.5}, {1, 1}), doctest::Contains("single-class"), Error);
  CHECK_THROWS_WITH_AS(auc({0.5, 0.5}, {0, 0}), doctest::Contains("single-class"), Error);
  CHECK_THROWS_AS(auc({}, {}), Error);
  CHECK_THROWS_AS(auc({0.5}, {1, 0}), Error);
  CHECK_THROWS_AS(auc({0.5, 0.5}, {1, 2}), Error);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(auc({inf, 0.5}, {1, 0}), Error);
}
