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
#include "edgesim/supply_model.hpp"
#include "edgesim/world.hpp"

namespace edgesim {

// ---------------------------------------------------------------------------
// Device policy. The ranker reorders each page once, when it arrives and
// before anything on it is exposed, so logged slots are the realized order.
// With supply on, every checkpoint on the newest page may trigger an auto
// page fetch; fetched items go to the front of the unexposed pool.
// ---------------------------------------------------------------------------

enum class RankerKind : int { server = 0, baseline = 1, dmr = 2 };

const char* ranker_kind_name(RankerKind k);
RankerKind ranker_kind_from_name(const std::string& s);

struct DevicePolicy {
  RankerKind ranker = RankerKind::server;
  const DmrModel* dmr = nullptr;
  const BaselineRanker* baseline = nullptr;
  RankBlend blend{};

  bool supply = false;
  const SupplyModel* supply_model = nullptr;
  SupplyConfig supply_cfg{};

  bool manual_paging = true;  // stress arm turns user paging off
};

struct SessionPlan {
  int64_t session_id = 0;
  int64_t user_id = 0;
  double start_minutes = 0.0;
  int32_t week = 0;
  int32_t hour = 0;
  uint64_t seed = 0;
};

// Deterministic schedule entry for session `index` under `world_seed`.
SessionPlan plan_session(const WorldConfig& cfg, uint64_t world_seed, int64_t index);

struct SessionMetrics {
  int64_t session_id = 0;
  int32_t exposures = 0;
  int32_t clicks = 0;
  int32_t orders = 0;
  int32_t manual_pages = 0;  // page_request events, initial fetch included
  int32_t auto_pages = 0;
  double minutes = 0.0;
};

struct SessionResult {
  SessionLog log;
  SessionMetrics metrics;
};

SessionMetrics metrics_from_log(const SessionLog& log);

SessionResult run_session(const WorldConfig& cfg, const Catalog& catalog,
                          const StaticsTable& statics, CloudServer& server, Transport& transport,
                          const DevicePolicy& policy, const LatentUser& user,
                          const SessionPlan& plan);

struct SimOptions {
  int64_t n_sessions = 0;
  uint64_t seed = 0;
  int64_t first_session = 0;
  bool line_transport = false;
};

std::vector<SessionResult> simulate_sessions(const WorldConfig& cfg, const Catalog& catalog,
                                             const StaticsTable& statics,
                                             const DevicePolicy& policy, const SimOptions& opt);

// Folds every page request in `results` into one request-rate curve.
QpsMeter stress_curve(const std::vector<SessionResult>& results, double horizon_minutes,
                      double bin_minutes);

}  // namespace edgesim
