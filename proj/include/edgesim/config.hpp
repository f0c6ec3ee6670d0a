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

#include <string>
#include <utility>
#include <vector>

#include "edgesim/session.hpp"
#include "edgesim/trainer.hpp"
#include "edgesim/world.hpp"

namespace edgesim {

// ---------------------------------------------------------------------------
// Harness configuration: the world plus data scale, training, and experiment
// knobs. Files are flat `key=value` lines ('#' comments); every key also
// round-trips through dump_config, so output headers replay into the same
// configuration.
// ---------------------------------------------------------------------------

struct HarnessConfig {
  WorldConfig world;

  int64_t train_sessions = 50000;
  int64_t eval_sessions = 10000;
  double eval_fraction = 0.1;

  TrainConfig train;
  SupplyObjective objective = SupplyObjective::special;
  SupplyConfig supply;
  RankBlend blend;

  int trial_seeds = 10;
  int64_t trial_sessions = 250;  // online sessions per (variant, seed)
  std::vector<double> alpha_grid = {0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
  int64_t stress_sessions = 4000;
  double stress_alpha = 0.2;
  int threads = 4;
};

// Parses one `key=value` override. Unknown keys or unparseable values throw
// bad_config.
void apply_override(HarnessConfig& cfg, const std::string& key, const std::string& value);

// Loads a config file on top of defaults.
HarnessConfig load_config(const std::string& path);

// Every knob as sorted (key, value) pairs; values re-parse exactly.
std::vector<std::pair<std::string, std::string>> dump_config(const HarnessConfig& cfg);

}  // namespace edgesim
