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
#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "edgesim/error.hpp"
#include "edgesim/protocol.hpp"
#include "edgesim/world.hpp"

using namespace edgesim;

namespace {

std::string error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

WorldConfig small_world() {
  WorldConfig cfg;
  cfg.n_items = 120;
  cfg.n_categories = 6;
  cfg.latent_k = 8;
  cfg.page_size = 10;
  cfg.max_pages = 4;
  cfg.n_users = 50;
  return cfg;
}

bool same_catalog(const Catalog& a, const Catalog& b) {
  if (a.items.size() != b.items.size()) return false;
  for (size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].item_id != b.items[i].item_id) return false;
    if (a.items[i].category_id != b.items[i].category_id) return false;
    if (a.items[i].q != b.items[i].q) return false;
    if (a.items[i].v_info != b.items[i].v_info) return false;
  }
  return true;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

}  // namespace

TEST_CASE("catalog generation is deterministic in the seed") {
  const WorldConfig cfg = small_world();
  const Catalog a = generate_catalog(cfg, 11);
  const Catalog b = generate_catalog(cfg, 11);
  const Catalog c = generate_catalog(cfg, 12);
  CHECK(same_catalog(a, b));
  CHECK(!same_catalog(a, c));
}

TEST_CASE("catalog vectors are unit norm and ids are dense") {
  const WorldConfig cfg = small_world();
  const Catalog catalog = generate_catalog(cfg, 3);
  REQUIRE(catalog.items.size() == 120);
  REQUIRE(catalog.centroids.size() == 6);
  for (size_t i = 0; i < catalog.items.size(); ++i) {
    const CatalogItem& it = catalog.items[i];
    CHECK(it.item_id == static_cast<int32_t>(i));
    CHECK(it.category_id >= 0);
    CHECK(it.category_id < 6);
    CHECK(std::abs(dot(it.q, it.q) - 1.0) <= 1e-12);
    for (double v : it.v_info) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  for (const auto& c : catalog.centroids) CHECK(std::abs(dot(c, c) - 1.0) <= 1e-12);

  const StaticsTable statics = catalog.statics();
  REQUIRE(statics.size() == catalog.items.size());
  for (size_t i = 0; i < statics.size(); ++i) {
    CHECK(statics[i].category_id == catalog.items[i].category_id);
    CHECK(statics[i].v_info == catalog.items[i].v_info);
  }
}

TEST_CASE("one category with zero noise collapses every item onto the centroid") {
  WorldConfig cfg = small_world();
  cfg.n_categories = 1;
  cfg.catalog_noise = 0.0;
  const Catalog catalog = generate_catalog(cfg, 5);
  for (const CatalogItem& it : catalog.items) CHECK(it.q == catalog.centroids[0]);
}

TEST_CASE("within-category similarity beats cross-category on every seed") {
  const WorldConfig cfg = small_world();
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Catalog catalog = generate_catalog(cfg, seed);
    double within = 0.0, cross = 0.0;
    int64_t n_within = 0, n_cross = 0;
    for (size_t i = 0; i < catalog.items.size(); ++i) {
      for (size_t j = i + 1; j < catalog.items.size(); ++j) {
        const double c = cosine(catalog.items[i].q, catalog.items[j].q);
        if (catalog.items[i].category_id == catalog.items[j].category_id) {
          within += c;
          ++n_within;
        } else {
          cross += c;
          ++n_cross;
        }
      }
    }
    REQUIRE(n_within > 0);
    REQUIRE(n_cross > 0);
    CHECK(within / n_within > cross / n_cross);
  }
}

TEST_CASE("bad world configs are rejected") {
  WorldConfig cfg = small_world();
  cfg.page_size = 0;
  CHECK(error_kind([&] { (void)generate_catalog(cfg, 1); }) == "bad_config");
  cfg = small_world();
  cfg.page_size = cfg.n_items + 1;
  CHECK(error_kind([&] { (void)generate_catalog(cfg, 1); }) == "bad_config");
  cfg = small_world();
  cfg.android.eta = 1.0;
  CHECK(error_kind([&] { (void)generate_catalog(cfg, 1); }) == "bad_config");
  cfg = small_world();
  cfg.patience_max = cfg.patience_min - 1;
  CHECK(error_kind([&] { (void)validate_world(cfg); }) == "bad_config");
}

TEST_CASE("users are deterministic, unit norm, and split across scenes") {
  const WorldConfig cfg = small_world();
  const Catalog catalog = generate_catalog(cfg, 2);
  int ios = 0;
  const int n = 400;
  for (int id = 0; id < n; ++id) {
    const LatentUser a = make_user(cfg, catalog, id, 9);
    const LatentUser b = make_user(cfg, catalog, id, 9);
    CHECK(a.u == b.u);
    CHECK(a.scene == b.scene);
    CHECK(std::abs(dot(a.u, a.u) - 1.0) <= 1e-12);
    if (a.scene == Scene::ios) ++ios;
  }
  CHECK(ios > n / 4);
  CHECK(ios < 3 * n / 4);
  const LatentUser other = make_user(cfg, catalog, 0, 10);
  CHECK(other.u != make_user(cfg, catalog, 0, 9).u);
}

TEST_CASE("drift keeps the user vector unit norm and eta zero is exact") {
  Rng rng(4);
  std::vector<double> u = normalized({1, 0, 0, 0, 0, 0, 0, 0});
  const std::vector<double> before = u;
  std::vector<double> q(8);
  for (int step = 0; step < 1000; ++step) {
    for (auto& x : q) x = rng.normal();
    q = normalized(std::move(q));
    drift(u, q, 0.0);
    CHECK(u == before);
  }
  for (int step = 0; step < 1000; ++step) {
    for (auto& x : q) x = rng.normal();
    q = normalized(std::move(q));
    drift(u, q, 0.3);
    CHECK(std::abs(std::sqrt(dot(u, u)) - 1.0) <= 1e-9);
  }
  CHECK(u != before);
}

TEST_CASE("noise-free server returns the exact affinity ranking in disjoint pages") {
  WorldConfig cfg = small_world();
  cfg.snapshot_noise = 0.0;
  cfg.score_noise = 0.0;
  const Catalog catalog = generate_catalog(cfg, 7);
  const LatentUser user = make_user(cfg, catalog, 1, 7);

  std::vector<int32_t> want(catalog.items.size());
  for (size_t i = 0; i < want.size(); ++i) want[i] = static_cast<int32_t>(i);
  std::stable_sort(want.begin(), want.end(), [&](int32_t a, int32_t b) {
    return dot(user.u, catalog.items[a].q) > dot(user.u, catalog.items[b].q);
  });

  CloudServer server(catalog, cfg, 40);
  server.open_session(1, user);
  std::set<int32_t> seen;
  for (int32_t page = 0; page < cfg.max_pages; ++page) {
    PagingRequest req;
    req.session_id = 1;
    req.page_index = page;
    const PageResponse resp = server.handle(req);
    REQUIRE(resp.items.size() == static_cast<size_t>(cfg.page_size));
    for (int64_t slot = 0; slot < cfg.page_size; ++slot) {
      const ItemFeatures& it = resp.items[slot];
      CHECK(it.item_id == want[page * cfg.page_size + slot]);
      CHECK(seen.insert(it.item_id).second);
      CHECK(it.p_ctr > 0.0);
      CHECK(it.p_ctr < 1.0);
      CHECK(it.p_cvr > 0.0);
      CHECK(it.p_cvr < 1.0);
      if (slot > 0) CHECK(resp.items[slot - 1].p_ctr >= it.p_ctr);
    }
  }
  PagingRequest req;
  req.session_id = 1;
  req.page_index = cfg.max_pages;
  CHECK(server.handle(req).items.empty());
}

TEST_CASE("server rankings are stable across interleaved sessions") {
  const WorldConfig cfg = small_world();
  const Catalog catalog = generate_catalog(cfg, 7);
  const LatentUser u1 = make_user(cfg, catalog, 1, 7);
  const LatentUser u2 = make_user(cfg, catalog, 2, 7);

  auto first_page = [&](CloudServer& server, int64_t sid, const LatentUser& user) {
    server.open_session(sid, user);
    PagingRequest req;
    req.session_id = sid;
    req.page_index = 0;
    return server.handle(req);
  };

  CloudServer a(catalog, cfg, 40);
  const PageResponse a1 = first_page(a, 1, u1);

  CloudServer b(catalog, cfg, 40);
  (void)first_page(b, 2, u2);
  const PageResponse b1 = first_page(b, 1, u1);

  REQUIRE(a1.items.size() == b1.items.size());
  CHECK(to_line(a1) == to_line(b1));
}

TEST_CASE("protocol misuse is rejected") {
  const WorldConfig cfg = small_world();
  const Catalog catalog = generate_catalog(cfg, 1);
  const LatentUser user = make_user(cfg, catalog, 3, 1);
  CloudServer server(catalog, cfg, 2);

  PagingRequest req;
  req.session_id = 5;
  req.page_index = 0;
  CHECK(error_kind([&] { (void)server.handle(req); }) == "protocol_violation");

  server.open_session(5, user);
  CHECK(error_kind([&] { server.open_session(5, user); }) == "protocol_violation");
  (void)server.handle(req);
  CHECK(error_kind([&] { (void)server.handle(req); }) == "protocol_violation");  // repeat
  req.page_index = 2;
  CHECK(error_kind([&] { (void)server.handle(req); }) == "protocol_violation");  // skip

  LogUpload upload;
  upload.log.session_id = 99;
  CHECK(error_kind([&] { server.receive(upload); }) == "protocol_violation");
  upload.log.session_id = 5;
  server.receive(upload);
  CHECK(server.logs_received() == 1);

  server.close_session(5);
  CHECK(error_kind([&] { server.close_session(5); }) == "protocol_violation");
}

TEST_CASE("wire messages round-trip bit-exactly") {
  PagingRequest req;
  req.session_id = 123456789012345;
  req.page_index = 3;
  req.trigger = Trigger::auto_page;
  req.wall_minutes = 811.0 + 1.0 / 3.0;
  ProtocolMessage m = parse_line(to_line(req));
  REQUIRE(m.kind == MessageKind::paging_request);
  CHECK(m.request.session_id == req.session_id);
  CHECK(m.request.page_index == req.page_index);
  CHECK(m.request.trigger == req.trigger);
  CHECK(m.request.wall_minutes == req.wall_minutes);

  PageResponse resp;
  resp.session_id = 7;
  resp.page_index = 1;
  ItemFeatures it;
  it.item_id = 42;
  it.category_id = 5;
  it.v_info = {0.1, 1e-17, 0.3333333333333333, 0.9999999999999999};
  it.p_ctr = 0.1 + 0.2;
  it.p_cvr = 1e-300;
  resp.items.push_back(it);
  m = parse_line(to_line(resp));
  REQUIRE(m.kind == MessageKind::page_response);
  REQUIRE(m.response.items.size() == 1);
  CHECK(m.response.items[0].item_id == 42);
  CHECK(m.response.items[0].v_info == it.v_info);
  CHECK(m.response.items[0].p_ctr == it.p_ctr);
  CHECK(m.response.items[0].p_cvr == it.p_cvr);
  CHECK(to_line(m.response) == to_line(resp));

  SessionLog log;
  log.session_id = 9;
  log.user_id = 11;
  log.scene = Scene::ios;
  log.week = 2;
  log.hour = 23;
  log.start_minutes = 100.25;
  PageRecord page;
  page.page_index = 0;
  page.items.push_back(it);
  log.pages.push_back(page);
  RealTimeEvent ev;
  ev.kind = EventKind::page_request;
  ev.page_index = 0;
  ev.trigger = Trigger::manual;
  log.events.push_back(ev);
  m = parse_line(to_line(LogUpload{log}));
  REQUIRE(m.kind == MessageKind::log_upload);
  CHECK(session_log_to_json_line(m.upload.log) == session_log_to_json_line(log));

  CHECK(error_kind([] { (void)parse_line("not json"); }) == "corrupt_data");
  CHECK(error_kind([] { (void)parse_line("{\"type\":\"nope\"}"); }) == "protocol_violation");
  CHECK(error_kind([] { (void)parse_line("{\"type\":\"paging_request\"}"); }) == "corrupt_data");
}

TEST_CASE("qps meter bins, folds, and merges") {
  QpsMeter meter(120.0, 30.0);
  REQUIRE(meter.n_bins() == 4);
  meter.add(0.0, Trigger::manual);
  meter.add(29.999, Trigger::manual);
  meter.add(30.0, Trigger::auto_page);
  meter.add(119.0, Trigger::manual);
  meter.add(120.0, Trigger::manual);   // folds to 0
  meter.add(125.0, Trigger::manual);   // folds to 5
  meter.add(-10.0, Trigger::manual);   // folds to 110
  CHECK(meter.manual_at(0) == 4);
  CHECK(meter.auto_at(1) == 1);
  CHECK(meter.manual_at(3) == 2);
  CHECK(meter.total_manual() == 6);
  CHECK(meter.total_auto() == 1);
  CHECK(meter.total() == 7);

  QpsMeter other(120.0, 30.0);
  other.add(45.0, Trigger::auto_page);
  meter.merge(other);
  CHECK(meter.auto_at(1) == 2);
  CHECK(meter.total() == 8);

  QpsMeter wrong(120.0, 60.0);
  CHECK(error_kind([&] { meter.merge(wrong); }) == "bad_argument");
  CHECK(error_kind([&] { (void)meter.manual_at(4); }) == "bad_argument");
  CHECK(error_kind([] { QpsMeter m(0.0, 1.0); }) == "bad_config");
}

TEST_CASE("halving the bin width splits every wide bin exactly in two") {
  Rng rng(77);
  QpsMeter wide(240.0, 30.0);
  QpsMeter narrow(240.0, 15.0);
  for (int i = 0; i < 500; ++i) {
    const double w = rng.uniform(0.0, 240.0);
    const Trigger trig = rng.bernoulli(0.3) ? Trigger::auto_page : Trigger::manual;
    wide.add(w, trig);
    narrow.add(w, trig);
  }
  REQUIRE(narrow.n_bins() == 2 * wide.n_bins());
  for (int b = 0; b < wide.n_bins(); ++b) {
    CHECK(wide.manual_at(b) == narrow.manual_at(2 * b) + narrow.manual_at(2 * b + 1));
    CHECK(wide.auto_at(b) == narrow.auto_at(2 * b) + narrow.auto_at(2 * b + 1));
  }
  CHECK(wide.total() == narrow.total());
  CHECK(wide.total() == 500);
}
