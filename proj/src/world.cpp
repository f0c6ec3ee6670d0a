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
#include "edgesim/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "edgesim/error.hpp"

namespace edgesim {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> gaussian_vector(Rng& rng, int64_t k) {
  std::vector<double> v(k);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

FeatureSpace WorldConfig::feature_space() const {
  FeatureSpace space;
  space.n_items = n_items;
  space.n_categories = n_categories;
  space.page_size = page_size;
  return space;
}

void validate_world(const WorldConfig& cfg) {
  if (cfg.n_items < 1 || cfg.n_categories < 1 || cfg.latent_k < 1) {
    fail("bad_config", "catalog sizes must be positive");
  }
  if (cfg.page_size < 1 || cfg.page_size > cfg.n_items) {
    fail("bad_config", "page size " + std::to_string(cfg.page_size) + " out of range");
  }
  if (cfg.max_pages < 1) fail("bad_config", "max_pages must be positive");
  if (cfg.n_users < 1) fail("bad_config", "n_users must be positive");
  if (cfg.catalog_noise < 0 || cfg.user_noise < 0 || cfg.user_mix < 0 ||
      cfg.snapshot_noise < 0 || cfg.score_noise < 0) {
    fail("bad_config", "noise scales must be non-negative");
  }
  if (cfg.ios_share < 0 || cfg.ios_share > 1) fail("bad_config", "ios_share outside [0,1]");
  if (cfg.patience_min <= 0 || cfg.patience_max < cfg.patience_min) {
    fail("bad_config", "patience range is empty");
  }
  if (cfg.android.eta < 0 || cfg.android.eta >= 1 || cfg.ios.eta < 0 || cfg.ios.eta >= 1) {
    fail("bad_config", "drift rate must sit in [0,1)");
  }
  if (cfg.scan_seconds_min <= 0 || cfg.scan_seconds_max < cfg.scan_seconds_min) {
    fail("bad_config", "scan seconds range is empty");
  }
  if (cfg.horizon_minutes <= 0 || cfg.stress_bin_minutes <= 0 ||
      cfg.stress_bin_minutes > cfg.horizon_minutes) {
    fail("bad_config", "stress horizon/bin out of range");
  }
  if (cfg.click_seq_cap < 1) fail("bad_config", "click_seq_cap must be positive");
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail("shape_mismatch", "dot of unequal lengths");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> normalized(std::vector<double> v) {
  const double norm = std::sqrt(dot(v, v));
  if (!(norm > 1e-9)) fail("bad_argument", "cannot normalize a near-zero vector");
  for (auto& x : v) x /= norm;
  return v;
}

void drift(std::vector<double>& u, const std::vector<double>& q, double eta) {
  if (eta == 0.0) return;
  if (u.size() != q.size()) fail("shape_mismatch", "drift of unequal lengths");
  for (size_t i = 0; i < u.size(); ++i) u[i] += eta * q[i];
  u = normalized(std::move(u));
}

StaticsTable Catalog::statics() const {
  StaticsTable table(items.size());
  for (const CatalogItem& it : items) table[it.item_id] = ItemStatics{it.category_id, it.v_info};
  return table;
}

Catalog generate_catalog(const WorldConfig& cfg, uint64_t seed) {
  validate_world(cfg);
  Catalog catalog;
  catalog.latent_k = cfg.latent_k;

  Rng centroid_rng(derive_seed(seed, "catalog-centroids"));
  catalog.centroids.reserve(cfg.n_categories);
  for (int64_t c = 0; c < cfg.n_categories; ++c) {
    catalog.centroids.push_back(normalized(gaussian_vector(centroid_rng, cfg.latent_k)));
  }

  Rng item_rng(derive_seed(seed, "catalog-items"));
  catalog.items.reserve(cfg.n_items);
  for (int64_t i = 0; i < cfg.n_items; ++i) {
    CatalogItem it;
    it.item_id = static_cast<int32_t>(i);
    it.category_id = static_cast<int32_t>(item_rng.below(cfg.n_categories));
    it.q = catalog.centroids[it.category_id];
    if (cfg.catalog_noise > 0) {
      for (auto& x : it.q) x += cfg.catalog_noise * item_rng.normal();
      it.q = normalized(std::move(it.q));
    }
    for (int k = 0; k < kStatsDim; ++k) it.v_info[k] = item_rng.uniform();
    catalog.items.push_back(std::move(it));
  }
  return catalog;
}

LatentUser make_user(const WorldConfig& cfg, const Catalog& catalog, int64_t user_id,
                     uint64_t world_seed) {
  if (user_id < 0) fail("bad_argument", "negative user id");
  if (catalog.centroids.empty()) fail("bad_argument", "catalog without centroids");
  Rng rng(derive_seed(world_seed, "user", static_cast<uint64_t>(user_id)));
  LatentUser user;
  user.user_id = user_id;
  user.scene = rng.bernoulli(cfg.ios_share) ? Scene::ios : Scene::android;
  // Two-interest taste: a primary category plus a secondary one at weight
  // user_mix, so one pooled summary of a session cannot stand in for
  // per-target affinity.
  size_t primary = rng.below(catalog.centroids.size());
  size_t secondary = primary;
  while (catalog.centroids.size() > 1 && secondary == primary) {
    secondary = rng.below(catalog.centroids.size());
  }
  std::vector<double> u = catalog.centroids[primary];
  if (cfg.user_mix > 0.0) {
    for (size_t k = 0; k < u.size(); ++k) u[k] += cfg.user_mix * catalog.centroids[secondary][k];
  }
  for (auto& x : u) x += cfg.user_noise * rng.normal();
  user.u = normalized(std::move(u));
  return user;
}

CloudServer::CloudServer(const Catalog& catalog, const WorldConfig& cfg, uint64_t seed)
    : catalog_(catalog), cfg_(cfg), seed_(seed) {
  if (catalog.items.empty()) fail("bad_config", "cloud server needs a catalog");
}

void CloudServer::open_session(int64_t session_id, const LatentUser& user) {
  if (sessions_.count(session_id)) {
    fail("protocol_violation", "session " + std::to_string(session_id) + " already open");
  }
  Rng rng(derive_seed(seed_, "cloud", static_cast<uint64_t>(session_id)));

  // Stale profile: the snapshot the server ranks with, not the live vector.
  std::vector<double> snapshot = user.u;
  for (auto& x : snapshot) x += cfg_.snapshot_noise * rng.normal();
  snapshot = normalized(std::move(snapshot));

  Session s;
  const size_t n = catalog_.items.size();
  s.order.resize(n);
  s.score.resize(n);
  std::iota(s.order.begin(), s.order.end(), 0);
  std::vector<double> raw(n);
  for (size_t i = 0; i < n; ++i) {
    raw[i] = dot(snapshot, catalog_.items[i].q) + cfg_.score_noise * rng.normal();
  }
  std::stable_sort(s.order.begin(), s.order.end(),
                   [&](int32_t a, int32_t b) { return raw[a] > raw[b]; });
  for (size_t i = 0; i < n; ++i) s.score[i] = raw[s.order[i]];
  sessions_.emplace(session_id, std::move(s));
}

PageResponse CloudServer::handle(const PagingRequest& req) {
  auto it = sessions_.find(req.session_id);
  if (it == sessions_.end()) {
    fail("protocol_violation", "request for unknown session " + std::to_string(req.session_id));
  }
  Session& s = it->second;
  if (req.page_index != s.next_page) {
    fail("protocol_violation", "page " + std::to_string(req.page_index) + " requested, expected " +
                                   std::to_string(s.next_page));
  }
  ++s.next_page;
  ++requests_served_;

  PageResponse resp;
  resp.session_id = req.session_id;
  resp.page_index = req.page_index;
  if (req.page_index >= cfg_.max_pages) return resp;
  const int64_t lo = static_cast<int64_t>(req.page_index) * cfg_.page_size;
  const int64_t hi = std::min<int64_t>(lo + cfg_.page_size, s.order.size());
  if (lo >= hi) return resp;
  if (hi - lo < cfg_.page_size) return resp;  // no partial pages at the tail
  resp.items.reserve(hi - lo);
  for (int64_t i = lo; i < hi; ++i) {
    const CatalogItem& item = catalog_.items[s.order[i]];
    ItemFeatures f;
    f.item_id = item.item_id;
    f.category_id = item.category_id;
    f.v_info = item.v_info;
    f.p_ctr = sigmoid(cfg_.ctr_scale * s.score[i] + cfg_.ctr_bias);
    f.p_cvr = sigmoid(cfg_.cvr_scale * s.score[i] + cfg_.cvr_bias);
    resp.items.push_back(f);
  }
  return resp;
}

void CloudServer::receive(const LogUpload& upload) {
  if (!sessions_.count(upload.log.session_id)) {
    fail("protocol_violation",
         "log upload for unknown session " + std::to_string(upload.log.session_id));
  }
  ++logs_received_;
}

void CloudServer::close_session(int64_t session_id) {
  if (sessions_.erase(session_id) == 0) {
    fail("protocol_violation", "close of unknown session " + std::to_string(session_id));
  }
}

}  // namespace edgesim
