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
#include "edgesim/session.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <string>

#include "edgesim/error.hpp"

namespace edgesim {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void validate_policy(const DevicePolicy& policy) {
  if (policy.ranker == RankerKind::dmr && policy.dmr == nullptr) {
    fail("bad_config", "dmr ranker selected without a model");
  }
  if (policy.ranker == RankerKind::baseline && policy.baseline == nullptr) {
    fail("bad_config", "baseline ranker selected without a model");
  }
  if (policy.supply && policy.supply_model == nullptr) {
    fail("bad_config", "supply paging selected without a model");
  }
  if (policy.supply && policy.supply_cfg.alpha < 0) {
    fail("bad_config", "supply alpha must be non-negative");
  }
}

// One page reorder at fetch time: score every incoming item against the
// current device context, then lay the page out in rank order.
std::vector<ItemFeatures> rerank_page(const SessionState& st, const std::vector<ItemFeatures>& in,
                                      const DevicePolicy& policy, const StaticsTable& statics) {
  std::vector<RankingSample> rows;
  rows.reserve(in.size());
  for (size_t slot = 0; slot < in.size(); ++slot) {
    FeatureBundle b;
    b.session_id = st.session_id();
    b.user_id = st.user_id();
    b.scene = st.scene();
    b.week = st.week();
    b.hour = st.hour();
    b.target = in[slot];
    b.target_position = static_cast<int32_t>(slot);
    b.clicks = st.click_seq();
    b.p_cv = st.p_cv();
    b.page_size = st.page_size();
    b.clicks_on_page = st.clicks_on_page();
    b.purchases_in_session = st.purchases_in_session();
    rows.push_back(to_ranking_sample(b));
  }
  const std::vector<ScoredItem> scored =
      policy.ranker == RankerKind::dmr ? policy.dmr->score_items(rows, statics, policy.blend)
                                       : policy.baseline->score_items(rows, statics, policy.blend);
  std::map<int32_t, const ItemFeatures*> by_id;
  for (const ItemFeatures& it : in) by_id.emplace(it.item_id, &it);
  std::vector<ItemFeatures> out;
  out.reserve(in.size());
  for (int32_t id : rank_page(scored)) out.push_back(*by_id.at(id));
  return out;
}

struct PoolSlot {
  int32_t item_id = -1;
  int32_t page_index = 0;
  int32_t slot = 0;
};

}  // namespace

const char* ranker_kind_name(RankerKind k) {
  switch (k) {
    case RankerKind::server: return "server";
    case RankerKind::baseline: return "baseline";
    case RankerKind::dmr: return "dmr";
  }
  fail("bad_argument", "unknown ranker kind");
}

RankerKind ranker_kind_from_name(const std::string& s) {
  if (s == "server") return RankerKind::server;
  if (s == "baseline") return RankerKind::baseline;
  if (s == "dmr") return RankerKind::dmr;
  fail("bad_config", "unknown ranker '" + s + "'");
}

SessionPlan plan_session(const WorldConfig& cfg, uint64_t world_seed, int64_t index) {
  if (index < 0) fail("bad_argument", "negative session index");
  Rng rng(derive_seed(world_seed, "schedule", static_cast<uint64_t>(index)));
  SessionPlan plan;
  plan.session_id = index;
  plan.user_id = static_cast<int64_t>(rng.below(cfg.n_users));
  plan.start_minutes = rng.uniform(0.0, cfg.horizon_minutes);
  plan.week = static_cast<int32_t>(rng.below(7));
  plan.hour = static_cast<int32_t>(std::fmod(plan.start_minutes, 1440.0) / 60.0);
  plan.seed = derive_seed(world_seed, "session", static_cast<uint64_t>(index));
  return plan;
}

SessionMetrics metrics_from_log(const SessionLog& log) {
  SessionMetrics m;
  m.session_id = log.session_id;
  for (const RealTimeEvent& ev : log.events) {
    switch (ev.kind) {
      case EventKind::expose: ++m.exposures; break;
      case EventKind::click: ++m.clicks; break;
      case EventKind::purchase: ++m.orders; break;
      case EventKind::page_request:
        if (ev.trigger == Trigger::auto_page) {
          ++m.auto_pages;
        } else {
          ++m.manual_pages;
        }
        break;
      case EventKind::exit: break;
    }
    m.minutes = ev.t_offset / 60.0;
  }
  return m;
}

SessionResult run_session(const WorldConfig& cfg, const Catalog& catalog,
                          const StaticsTable& statics, CloudServer& server, Transport& transport,
                          const DevicePolicy& policy, const LatentUser& user,
                          const SessionPlan& plan) {
  validate_policy(policy);
  if (user.user_id != plan.user_id) fail("bad_argument", "plan and user disagree");

  const SceneBehavior& b = user.scene == Scene::ios ? cfg.ios : cfg.android;
  Rng rng(plan.seed);
  std::vector<double> u = user.u;
  double patience = rng.uniform(cfg.patience_min, cfg.patience_max);
  double clock = 0.0;

  SessionLog log;
  log.session_id = plan.session_id;
  log.user_id = plan.user_id;
  log.scene = user.scene;
  log.week = plan.week;
  log.hour = plan.hour;
  log.start_minutes = plan.start_minutes;

  SessionState st(plan.session_id, plan.user_id, user.scene, plan.week, plan.hour,
                  static_cast<int32_t>(cfg.page_size), cfg.click_seq_cap);
  std::deque<PoolSlot> pool;
  int32_t pages_fetched = 0;
  int auto_pages_used = 0;
  bool server_exhausted = false;

  auto push_event = [&](const RealTimeEvent& ev) {
    log.events.push_back(ev);
    st.on_event(ev);
  };

  server.open_session(plan.session_id, user);

  auto fetch_page = [&](Trigger trig) -> bool {
    if (server_exhausted || pages_fetched >= cfg.max_pages) return false;
    PagingRequest req;
    req.session_id = plan.session_id;
    req.page_index = pages_fetched;
    req.trigger = trig;
    req.wall_minutes = plan.start_minutes + clock / 60.0;
    PageResponse resp = transport.fetch(req);
    if (resp.items.empty()) {
      server_exhausted = true;
      return false;
    }
    RealTimeEvent ev;
    ev.kind = EventKind::page_request;
    ev.t_offset = clock;
    ev.page_index = pages_fetched;
    ev.trigger = trig;
    push_event(ev);

    PageRecord rec;
    rec.page_index = pages_fetched;
    rec.items = policy.ranker == RankerKind::server ? resp.items
                                                    : rerank_page(st, resp.items, policy, statics);
    st.on_page(rec);
    log.pages.push_back(rec);
    std::vector<PoolSlot> incoming;
    incoming.reserve(rec.items.size());
    for (size_t slot = 0; slot < rec.items.size(); ++slot) {
      incoming.push_back(PoolSlot{rec.items[slot].item_id, pages_fetched,
                                  static_cast<int32_t>(slot)});
    }
    pool.insert(pool.begin(), incoming.begin(), incoming.end());
    ++pages_fetched;
    return true;
  };

  if (fetch_page(Trigger::manual)) {
    while (patience > 0) {
      if (pool.empty()) {
        if (!policy.manual_paging || !fetch_page(Trigger::manual)) break;
        patience -= cfg.manual_page_cost;
        continue;
      }
      const PoolSlot s = pool.front();
      pool.pop_front();
      clock += rng.uniform(cfg.scan_seconds_min, cfg.scan_seconds_max);

      RealTimeEvent ev;
      ev.kind = EventKind::expose;
      ev.t_offset = clock;
      ev.item_id = s.item_id;
      ev.page_index = s.page_index;
      ev.position = s.slot;
      push_event(ev);
      patience -= cfg.exposure_cost;

      const std::vector<double>& q = catalog.items[s.item_id].q;
      const double affinity = dot(u, q);
      const double p_click = sigmoid(b.c0 + b.c1 * affinity - b.pos_bias * std::log1p(s.slot));
      if (rng.bernoulli(p_click)) {
        const double stay = std::min(std::exp(rng.normal(cfg.stay_log_mean, cfg.stay_log_sigma)),
                                     cfg.stay_cap_seconds);
        clock += stay;
        RealTimeEvent click;
        click.kind = EventKind::click;
        click.t_offset = clock;
        click.item_id = s.item_id;
        click.stay_seconds = stay;
        push_event(click);
        patience += cfg.click_bonus;

        if (rng.bernoulli(sigmoid(b.c2 + b.c3 * affinity))) {
          RealTimeEvent buy;
          buy.kind = EventKind::purchase;
          buy.t_offset = clock;
          buy.item_id = s.item_id;
          push_event(buy);
        }
        drift(u, q, b.eta);
      }

      // Checkpoint on the newest page: the supply model may order the next
      // page before the user runs out of list.
      if (policy.supply && s.page_index == pages_fetched - 1 &&
          st.exposures_on_page(s.page_index) % policy.supply_cfg.checkpoint_stride == 0) {
        const UpliftEstimate est = policy.supply_model->estimate(
            supply_context(st), statics, policy.supply_cfg.objective);
        if (should_page(est, policy.supply_cfg, auto_pages_used)) {
          if (fetch_page(Trigger::auto_page)) ++auto_pages_used;
        }
      }

      // The user pages on their own when nothing left looks appealing.
      if (policy.manual_paging && !pool.empty() && patience > 0) {
        double best = 0.0;
        for (const PoolSlot& rest : pool) {
          best = std::max(best, sigmoid(b.c0 + b.c1 * dot(u, catalog.items[rest.item_id].q)));
        }
        if (best < cfg.manual_page_threshold && fetch_page(Trigger::manual)) {
          patience -= cfg.manual_page_cost;
        }
      }
    }
  }

  RealTimeEvent exit_ev;
  exit_ev.kind = EventKind::exit;
  exit_ev.t_offset = clock;
  push_event(exit_ev);

  transport.upload(LogUpload{log});
  server.close_session(plan.session_id);

  SessionResult result;
  result.metrics = metrics_from_log(log);
  result.log = std::move(log);
  return result;
}

std::vector<SessionResult> simulate_sessions(const WorldConfig& cfg, const Catalog& catalog,
                                             const StaticsTable& statics,
                                             const DevicePolicy& policy, const SimOptions& opt) {
  validate_world(cfg);
  validate_policy(policy);
  if (opt.n_sessions < 0) fail("bad_argument", "negative session count");

  CloudServer server(catalog, cfg, derive_seed(opt.seed, "server"));
  std::unique_ptr<Transport> transport;
  if (opt.line_transport) {
    transport = std::make_unique<LineTransport>(server);
  } else {
    transport = std::make_unique<DirectTransport>(server);
  }

  std::map<int64_t, LatentUser> users;
  std::vector<SessionResult> results;
  results.reserve(opt.n_sessions);
  for (int64_t i = 0; i < opt.n_sessions; ++i) {
    const SessionPlan plan = plan_session(cfg, opt.seed, opt.first_session + i);
    auto it = users.find(plan.user_id);
    if (it == users.end()) {
      it = users.emplace(plan.user_id, make_user(cfg, catalog, plan.user_id, opt.seed)).first;
    }
    results.push_back(run_session(cfg, catalog, statics, server, *transport, policy, it->second, plan));
  }
  return results;
}

QpsMeter stress_curve(const std::vector<SessionResult>& results, double horizon_minutes,
                      double bin_minutes) {
  QpsMeter meter(horizon_minutes, bin_minutes);
  for (const SessionResult& r : results) {
    for (const RealTimeEvent& ev : r.log.events) {
      if (ev.kind != EventKind::page_request) continue;
      meter.add(r.log.start_minutes + ev.t_offset / 60.0, ev.trigger);
    }
  }
  return meter;
}

}  // namespace edgesim
