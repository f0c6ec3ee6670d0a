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

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "edgesim/config.hpp"

namespace edgesim {

// ---------------------------------------------------------------------------
// Experiment records. One fixed CSV schema covers every experiment; columns
// that do not apply to a row stay empty. Output files start with a sorted
// "# key=value" block holding the full resolved config, the command, and the
// seed, so any CSV can be replayed from its own header.
// ---------------------------------------------------------------------------

struct MetricsRecord {
  std::string experiment;
  std::string variant;
  int64_t seed = -1;  // evaluation seed index; -1 when not applicable
  double ctr_auc = std::numeric_limits<double>::quiet_NaN();
  double ctcvr_auc = std::numeric_limits<double>::quiet_NaN();
  double local_auc = std::numeric_limits<double>::quiet_NaN();
  double global_auc = std::numeric_limits<double>::quiet_NaN();
  double uplift_auc = std::numeric_limits<double>::quiet_NaN();
  double orders_per_session = std::numeric_limits<double>::quiet_NaN();
  double clicks_per_session = std::numeric_limits<double>::quiet_NaN();
  double depth = std::numeric_limits<double>::quiet_NaN();
  double manual_pages = std::numeric_limits<double>::quiet_NaN();
  double auto_pages = std::numeric_limits<double>::quiet_NaN();
};

std::string metrics_header();
std::string metrics_row(const MetricsRecord& r);

std::vector<std::string> config_header_lines(const HarnessConfig& cfg, uint64_t seed,
                                             const std::string& command);
void write_metrics_csv(const std::string& path, const HarnessConfig& cfg, uint64_t seed,
                       const std::string& command, const std::vector<MetricsRecord>& rows);

// Runs `fn(0..n-1)` across up to `threads` workers; any exception rethrows.
void parallel_for(int threads, int64_t n, const std::function<void(int64_t)>& fn);

// ---------------------------------------------------------------------------
// Shared pipeline stages.
// ---------------------------------------------------------------------------

struct WorldData {
  Catalog catalog;
  StaticsTable statics;
  SampleSplit split;
  int64_t sessions = 0;
};

// Simulates `n_sessions` logging sessions (server order, no supply) on the
// world derived from `seed` and splits the emitted samples by user hash.
WorldData build_world_data(const HarnessConfig& cfg, uint64_t seed, int64_t n_sessions);

// Catalog and statics only, for commands that simulate but never train.
WorldData build_world_shell(const HarnessConfig& cfg, uint64_t seed);

struct TrainedModels {
  std::unique_ptr<SupplyModel> supply;
  std::unique_ptr<DmrModel> dmr;
  std::unique_ptr<BaselineRanker> baseline;
  TrainReport supply_report;
  TrainReport dmr_report;
  TrainReport baseline_report;
};

TrainedModels train_models(const HarnessConfig& cfg, uint64_t seed, const WorldData& data);

// Overwrites every parameter of `dst` from `src`; the key sets and shapes
// must agree exactly (a checkpoint from a different architecture is corrupt).
void restore_params(ParameterStore& dst, const ParameterStore& src);

// Checkpoint layout inside a run directory.
std::string supply_checkpoint(const std::string& dir);
std::string dmr_checkpoint(const std::string& dir);
std::string baseline_checkpoint(const std::string& dir);

void save_models(const std::string& dir, const TrainedModels& models);

// Rebuilds the model shells from (cfg, seed) and loads their parameters from
// a prior train run in `dir`. Reports stay empty.
TrainedModels load_models(const HarnessConfig& cfg, uint64_t seed, const std::string& dir);

struct RankingAuc {
  double ctr = 0.0;
  double ctcvr = 0.0;
};
RankingAuc dmr_auc(const DmrModel& model, const std::vector<RankingSample>& rows,
                   const StaticsTable& statics);
RankingAuc baseline_auc(const BaselineRanker& model, const std::vector<RankingSample>& rows,
                        const StaticsTable& statics);

struct SupplyAuc {
  double local = 0.0;
  double global = 0.0;
  double uplift = 0.0;
};
SupplyAuc supply_auc(const SupplyModel& model, const std::vector<SupplySample>& rows,
                     const StaticsTable& statics, SupplyObjective objective,
                     const SupplyAblation& ablation = {});

struct OnlineMetrics {
  double orders_per_session = 0.0;
  double clicks_per_session = 0.0;
  double depth = 0.0;
  double manual_pages = 0.0;
  double auto_pages = 0.0;
};
OnlineMetrics summarize(const std::vector<SessionResult>& results);

// ---------------------------------------------------------------------------
// Experiments. Per-seed cells fan out over cfg.threads workers; row order is
// fixed (variant, then seed), independent of scheduling.
// ---------------------------------------------------------------------------

std::vector<MetricsRecord> run_trial(const HarnessConfig& cfg, uint64_t seed,
                                     const WorldData& data, const TrainedModels& models);

std::vector<MetricsRecord> run_ablation(const HarnessConfig& cfg, uint64_t seed,
                                        const WorldData& data, const TrainedModels& models);

std::vector<MetricsRecord> run_sweep(const HarnessConfig& cfg, uint64_t seed,
                                     const WorldData& data, const TrainedModels& models);

struct StressResult {
  QpsMeter manual_curve;
  QpsMeter ms_curve;
  double max_rel_deviation = 0.0;
};
StressResult run_stress(const HarnessConfig& cfg, uint64_t seed, const WorldData& data,
                        const TrainedModels& models);
void write_stress_csv(const std::string& path, const HarnessConfig& cfg, uint64_t seed,
                      const StressResult& result);

}  // namespace edgesim
