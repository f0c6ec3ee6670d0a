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
#include <vector>

#include "edgesim/ranking_model.hpp"
#include "edgesim/session.hpp"
#include "edgesim/supply_model.hpp"

namespace edgesim {

// ---------------------------------------------------------------------------
// Mini-batch training. Sample order is reshuffled per epoch from the config
// seed, so a fixed (samples, seed, lr) triple always lands on bit-identical
// parameters. Missing gradients (untouched branches) step as zeros.
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 1;
  int64_t batch_size = 256;
  double lr = 0.05;
  double lr_decay = 0.0;
  uint64_t seed = 0;
};

struct TrainReport {
  int64_t batches = 0;
  int64_t samples = 0;
  std::vector<double> losses;  // one entry per optimizer step
  double first_loss = 0.0;
  double last_loss = 0.0;
  double head_mean = 0.0;  // mean over the first quarter of steps
  double tail_mean = 0.0;  // mean over the last quarter
};

TrainReport train_supply(SupplyModel& model, const std::vector<SupplySample>& samples,
                         const StaticsTable& statics, SupplyObjective objective,
                         const TrainConfig& cfg, const SupplyAblation& ablation = {});

// Scene-pure forwards joined per step: L = (n_a * L_a + n_i * L_i) / n.
TrainReport train_dmr(DmrModel& model, const std::vector<RankingSample>& samples,
                      const StaticsTable& statics, const TrainConfig& cfg);

TrainReport train_baseline(BaselineRanker& model, const std::vector<RankingSample>& samples,
                           const StaticsTable& statics, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Log emission with a user-disjoint split: every session of one user lands on
// the same side, keyed by a seed-free hash of the user id.
// ---------------------------------------------------------------------------

struct SampleSplit {
  std::vector<SupplySample> supply_train;
  std::vector<SupplySample> supply_eval;
  std::vector<RankingSample> ranking_train;
  std::vector<RankingSample> ranking_eval;
};

bool is_eval_user(int64_t user_id, double eval_fraction);

SampleSplit emit_split(const std::vector<SessionResult>& results, const EmitConfig& cfg,
                       double eval_fraction = 0.1);

void write_loss_csv(const std::string& path, const TrainReport& report);

}  // namespace edgesim
