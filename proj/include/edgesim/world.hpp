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

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "edgesim/features.hpp"
#include "edgesim/protocol.hpp"
#include "edgesim/rng.hpp"

namespace edgesim {

// ---------------------------------------------------------------------------
// World configuration. Behavior follows a latent-affinity model: a user and
// an item each carry a unit vector, affinity is their dot product, and
//
//   p(click | slot)    = sigmoid(c0 + c1 * affinity - pos_bias * log1p(slot))
//   p(order | click)   = sigmoid(c2 + c3 * affinity)
//   interest drift     = u <- normalize(u + eta * q)   after each click
//
// with per-scene constants. Browsing runs on a patience budget: exposures
// and manual page turns spend it, clicks refill it, and the session ends
// when it runs out. The user turns the page manually when the best appeal
// left in the unexposed pool drops below a threshold.
// ---------------------------------------------------------------------------

struct SceneBehavior {
  double c0 = -2.9;
  double c1 = 3.2;
  double pos_bias = 0.35;
  double c2 = -3.1;
  double c3 = 1.4;
  double eta = 0.25;
};

struct WorldConfig {
  int64_t n_items = 3000;
  int64_t n_categories = 20;
  int64_t latent_k = 8;
  int64_t page_size = 20;
  int32_t max_pages = 6;
  double catalog_noise = 0.25;

  int64_t n_users = 2000;
  double ios_share = 0.5;
  double user_noise = 0.9;
  double user_mix = 0.85;  // weight of the secondary interest centroid

  // Cloud side: the server ranks a stale snapshot of the user vector with
  // noisy scores, then maps scores to calibrated probabilities.
  double snapshot_noise = 0.3;
  double score_noise = 0.15;
  double ctr_scale = 1.8;
  double ctr_bias = -2.2;
  double cvr_scale = 1.5;
  double cvr_bias = -3.2;

  SceneBehavior android{};
  SceneBehavior ios{-3.3, 3.8, 0.45, -3.4, 1.8, 0.35};

  double patience_min = 14.0;
  double patience_max = 26.0;
  double exposure_cost = 1.0;
  double click_bonus = 2.0;
  double manual_page_cost = 2.0;
  double manual_page_threshold = 0.06;

  double scan_seconds_min = 0.8;
  double scan_seconds_max = 2.5;
  double stay_log_mean = 3.0;
  double stay_log_sigma = 0.8;
  double stay_cap_seconds = 600.0;

  double horizon_minutes = 1440.0;
  double stress_bin_minutes = 30.0;
  int click_seq_cap = kDefaultClickSeqCap;

  FeatureSpace feature_space() const;
};

// Throws bad_config when sizes or rates are out of range.
void validate_world(const WorldConfig& cfg);

// ---------------------------------------------------------------------------
// Catalog: category centroids on the unit sphere, item vectors drawn as
// normalize(centroid + noise). Stats proxies are uniform in [0,1].
// ---------------------------------------------------------------------------

struct CatalogItem {
  int32_t item_id = -1;
  int32_t category_id = -1;
  std::vector<double> q;  // unit norm, length latent_k
  std::array<double, kStatsDim> v_info{};
};

struct Catalog {
  int64_t latent_k = 0;
  std::vector<std::vector<double>> centroids;  // one per category, unit norm
  std::vector<CatalogItem> items;              // item_id == index

  StaticsTable statics() const;
};

Catalog generate_catalog(const WorldConfig& cfg, uint64_t seed);

struct LatentUser {
  int64_t user_id = 0;
  Scene scene = Scene::android;
  std::vector<double> u;  // unit norm
};

// Deterministic in (cfg, catalog seed inputs, user_id, world_seed).
LatentUser make_user(const WorldConfig& cfg, const Catalog& catalog, int64_t user_id,
                     uint64_t world_seed);

// Vector helpers shared by the world and its tests.
double dot(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> normalized(std::vector<double> v);  // throws on ~zero norm
// u <- normalize(u + eta * q); eta = 0 leaves u bit-identical.
void drift(std::vector<double>& u, const std::vector<double>& q, double eta);

// ---------------------------------------------------------------------------
// Cloud server. At session open it freezes one noisy ranking of the whole
// catalog (stale snapshot of the user vector plus per-item score noise) and
// serves consecutive disjoint slices of it as pages. Page indices must
// arrive in exact order; anything else is a protocol violation.
// ---------------------------------------------------------------------------

class CloudServer {
 public:
  CloudServer(const Catalog& catalog, const WorldConfig& cfg, uint64_t seed);

  void open_session(int64_t session_id, const LatentUser& user);
  PageResponse handle(const PagingRequest& req);
  void receive(const LogUpload& upload);
  void close_session(int64_t session_id);

  int64_t requests_served() const { return requests_served_; }
  int64_t logs_received() const { return logs_received_; }

 private:
  struct Session {
    std::vector<int32_t> order;  // item ids, best score first
    std::vector<double> score;   // aligned with `order`
    int32_t next_page = 0;
  };

  const Catalog& catalog_;
  const WorldConfig& cfg_;
  uint64_t seed_;
  std::map<int64_t, Session> sessions_;
  int64_t requests_served_ = 0;
  int64_t logs_received_ = 0;
};

}  // namespace edgesim
