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
#include "edgesim/features.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "edgesim/error.hpp"
#include "json.hpp"

namespace edgesim {

using ordered_json = nlohmann::ordered_json;

void validate_item(const ItemFeatures& it) {
  if (it.item_id < 0) fail("bad_argument", "item id " + std::to_string(it.item_id));
  if (!(it.p_ctr >= 0.0 && it.p_ctr <= 1.0) || !(it.p_cvr >= 0.0 && it.p_cvr <= 1.0)) {
    fail("bad_argument", "server scores out of [0,1] for item " + std::to_string(it.item_id));
  }
  for (double v : it.v_info) {
    if (!std::isfinite(v)) fail("non_finite", "stats vector of item " + std::to_string(it.item_id));
  }
}

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::expose: return "expose";
    case EventKind::click: return "click";
    case EventKind::purchase: return "purchase";
    case EventKind::page_request: return "page_request";
    case EventKind::exit: return "exit";
  }
  fail("bad_argument", "unknown event kind");
}

const char* trigger_name(Trigger t) { return t == Trigger::manual ? "manual" : "auto"; }

EventKind event_kind_from_name(const std::string& s) {
  if (s == "expose") return EventKind::expose;
  if (s == "click") return EventKind::click;
  if (s == "purchase") return EventKind::purchase;
  if (s == "page_request") return EventKind::page_request;
  if (s == "exit") return EventKind::exit;
  fail("corrupt_data", "unknown event kind '" + s + "'");
}

Trigger trigger_from_name(const std::string& s) {
  if (s == "manual") return Trigger::manual;
  if (s == "auto") return Trigger::auto_page;
  fail("corrupt_data", "unknown trigger '" + s + "'");
}

const char* supply_objective_name(SupplyObjective o) {
  return o == SupplyObjective::special ? "special" : "general";
}

SupplyObjective supply_objective_from_name(const std::string& s) {
  if (s == "special") return SupplyObjective::special;
  if (s == "general") return SupplyObjective::general;
  fail("bad_config", "unknown supply objective '" + s + "'");
}

// ---------------------------------------------------------------------------
// SessionState
// ---------------------------------------------------------------------------

SessionState::SessionState(int64_t session_id, int64_t user_id, Scene scene, int32_t week,
                           int32_t hour, int32_t page_size, int click_cap)
    : session_id_(session_id),
      user_id_(user_id),
      scene_(scene),
      week_(week),
      hour_(hour),
      page_size_(page_size),
      click_cap_(click_cap) {
  if (week < 0 || week > 6) fail("bad_argument", "week bucket " + std::to_string(week));
  if (hour < 0 || hour > 23) fail("bad_argument", "hour bucket " + std::to_string(hour));
  if (page_size < 1) fail("bad_argument", "page size " + std::to_string(page_size));
  if (click_cap < 1) fail("bad_argument", "click sequence cap " + std::to_string(click_cap));
}

void SessionState::on_page(const PageRecord& page) {
  if (page.page_index <= last_fetched_page_) {
    fail("corrupt_data", "page " + std::to_string(page.page_index) + " fetched after page " +
                             std::to_string(last_fetched_page_));
  }
  if (page.items.empty()) fail("corrupt_data", "empty page " + std::to_string(page.page_index));
  if (static_cast<int32_t>(page.items.size()) != page_size_) {
    fail("corrupt_data", "page " + std::to_string(page.page_index) + " has " +
                             std::to_string(page.items.size()) + " items, expected " +
                             std::to_string(page_size_));
  }
  for (size_t slot = 0; slot < page.items.size(); ++slot) {
    const ItemFeatures& it = page.items[slot];
    validate_item(it);
    auto [pos, inserted] = items_.emplace(
        it.item_id, Placed{it, page.page_index, static_cast<int32_t>(slot), false, false});
    if (!inserted) {
      fail("corrupt_data", "item " + std::to_string(it.item_id) + " fetched twice");
    }
  }
  last_fetched_page_ = page.page_index;
}

void SessionState::on_event(const RealTimeEvent& ev) {
  if (exited_) fail("corrupt_data", "event after session exit");
  switch (ev.kind) {
    case EventKind::expose: {
      auto it = items_.find(ev.item_id);
      if (it == items_.end()) {
        fail("corrupt_data", "expose of unfetched item " + std::to_string(ev.item_id));
      }
      Placed& p = it->second;
      if (p.exposed) fail("corrupt_data", "item " + std::to_string(ev.item_id) + " exposed twice");
      if (ev.position != p.slot || ev.page_index != p.page_index) {
        fail("corrupt_data", "expose of item " + std::to_string(ev.item_id) +
                                 " disagrees with its page placement");
      }
      p.exposed = true;
      ++exposures_;
      ++exposures_per_page_[p.page_index];
      p_cv_ = p.slot;
      current_page_ = p.page_index;
      break;
    }
    case EventKind::click: {
      auto it = items_.find(ev.item_id);
      if (it == items_.end() || !it->second.exposed) {
        fail("corrupt_data", "click on unexposed item " + std::to_string(ev.item_id));
      }
      if (!(ev.stay_seconds >= 0.0)) {
        fail("corrupt_data", "negative stay time on item " + std::to_string(ev.item_id));
      }
      it->second.clicked = true;
      clicks_.push_back({ev.item_id, it->second.item.category_id, ev.stay_seconds});
      while (static_cast<int>(clicks_.size()) > click_cap_) clicks_.pop_front();
      ++clicks_on_page_;
      break;
    }
    case EventKind::purchase: {
      auto it = items_.find(ev.item_id);
      if (it == items_.end() || !it->second.clicked) {
        fail("corrupt_data", "purchase without click on item " + std::to_string(ev.item_id));
      }
      ++purchases_;
      break;
    }
    case EventKind::page_request:
      clicks_on_page_ = 0;
      break;
    case EventKind::exit:
      exited_ = true;
      break;
  }
}

FeatureBundle SessionState::bundle_for(int32_t item_id) const {
  auto it = items_.find(item_id);
  if (it == items_.end()) {
    fail("bad_argument", "target item " + std::to_string(item_id) + " is not on the device");
  }
  if (it->second.exposed) {
    fail("bad_argument", "target item " + std::to_string(item_id) + " was already exposed");
  }
  FeatureBundle b;
  b.session_id = session_id_;
  b.user_id = user_id_;
  b.scene = scene_;
  b.week = week_;
  b.hour = hour_;
  b.target = it->second.item;
  b.target_position = it->second.slot;
  b.clicks = click_seq();
  b.p_cv = p_cv_;
  b.page_size = page_size_;
  b.clicks_on_page = clicks_on_page_;
  b.purchases_in_session = purchases_;
  return b;
}

int32_t SessionState::exposures_on_page(int32_t page_index) const {
  auto it = exposures_per_page_.find(page_index);
  return it == exposures_per_page_.end() ? 0 : it->second;
}

bool SessionState::fetched(int32_t item_id) const { return items_.count(item_id) != 0; }

bool SessionState::exposed(int32_t item_id) const {
  auto it = items_.find(item_id);
  return it != items_.end() && it->second.exposed;
}

const ItemFeatures* SessionState::find_item(int32_t item_id) const {
  auto it = items_.find(item_id);
  return it == items_.end() ? nullptr : &it->second.item;
}

int32_t SessionState::page_of(int32_t item_id) const {
  auto it = items_.find(item_id);
  if (it == items_.end()) fail("bad_argument", "unknown item " + std::to_string(item_id));
  return it->second.page_index;
}

int32_t SessionState::slot_of(int32_t item_id) const {
  auto it = items_.find(item_id);
  if (it == items_.end()) fail("bad_argument", "unknown item " + std::to_string(item_id));
  return it->second.slot;
}

std::vector<ItemRef> SessionState::page_refs(int32_t page_index) const {
  std::vector<ItemRef> refs(page_size_);
  std::vector<bool> seen(page_size_, false);
  for (const auto& [id, p] : items_) {
    if (p.page_index != page_index) continue;
    refs[p.slot] = ItemRef{id, p.item.p_ctr, p.item.p_cvr};
    seen[p.slot] = true;
  }
  for (bool s : seen) {
    if (!s) fail("bad_argument", "page " + std::to_string(page_index) + " was never fetched");
  }
  return refs;
}

std::vector<ClickEntry> SessionState::click_seq() const {
  return std::vector<ClickEntry>(clicks_.begin(), clicks_.end());
}

SupplySample supply_context(const SessionState& st) {
  if (st.exposures() == 0) fail("bad_argument", "supply checkpoint before any exposure");
  SupplySample s;
  s.session_id = st.session_id();
  s.user_id = st.user_id();
  s.scene = st.scene();
  s.week = st.week();
  s.hour = st.hour();
  s.page_index = st.current_page();
  s.p_cv = st.p_cv();
  s.window = st.exposures_on_page(s.page_index);
  s.clicks_on_page = st.clicks_on_page();
  s.purchases_in_session = st.purchases_in_session();
  s.page = st.page_refs(s.page_index);
  s.seq = st.click_seq();
  return s;
}

RankingSample to_ranking_sample(const FeatureBundle& b) {
  RankingSample r;
  r.session_id = b.session_id;
  r.user_id = b.user_id;
  r.scene = b.scene;
  r.week = b.week;
  r.hour = b.hour;
  r.position = b.target_position;
  r.clicks_on_page = b.clicks_on_page;
  r.purchases_in_session = b.purchases_in_session;
  r.target = ItemRef{b.target.item_id, b.target.p_ctr, b.target.p_cvr};
  r.seq = b.clicks;
  return r;
}

// ---------------------------------------------------------------------------
// Labels and emission.
// ---------------------------------------------------------------------------

SupplyLabels make_supply_labels(const std::vector<uint8_t>& orders_by_slot, int32_t window,
                                SupplyObjective objective) {
  if (window < 0 || window > static_cast<int32_t>(orders_by_slot.size())) {
    fail("bad_argument", "exposed window " + std::to_string(window) +
                             " is not a prefix of a page of " +
                             std::to_string(orders_by_slot.size()) + " items");
  }
  SupplyLabels out;
  for (size_t j = 0; j < orders_by_slot.size(); ++j) {
    if (!orders_by_slot[j]) continue;
    ++out.v_g;
    if (static_cast<int32_t>(j) < window) ++out.v_l;
  }
  if (objective == SupplyObjective::special) {
    out.v_l = std::min(out.v_l, 1);
    out.v_g = std::min(out.v_g, 1);
  }
  return out;
}

EmittedSamples emit_training_logs(const SessionLog& log, const EmitConfig& cfg) {
  EmittedSamples out;
  emit_training_logs(log, cfg, &out.supply, &out.ranking);
  return out;
}

void emit_training_logs(const SessionLog& log, const EmitConfig& cfg,
                        std::vector<SupplySample>* supply, std::vector<RankingSample>* ranking) {
  if (cfg.checkpoint_stride < 1) {
    fail("bad_argument", "checkpoint stride " + std::to_string(cfg.checkpoint_stride));
  }
  if (log.pages.empty()) fail("corrupt_data", "session log without pages");
  const int32_t page_size = static_cast<int32_t>(log.pages.front().items.size());

  std::map<int32_t, const PageRecord*> pages;
  for (const PageRecord& p : log.pages) {
    if (!pages.emplace(p.page_index, &p).second) {
      fail("corrupt_data", "duplicate page " + std::to_string(p.page_index) + " in log");
    }
  }

  SessionState st(log.session_id, log.user_id, log.scene, log.week, log.hour, page_size,
                  cfg.click_cap);

  const size_t ranking_base = ranking->size();
  const size_t supply_base = supply->size();
  std::map<int32_t, size_t> sample_of_item;           // item id -> ranking sample index
  std::map<int32_t, std::vector<uint8_t>> orders;     // page index -> order flags by slot
  bool pending_checkpoint = false;

  auto cut_checkpoint = [&] {
    if (!pending_checkpoint) return;
    pending_checkpoint = false;
    supply->push_back(supply_context(st));
  };

  for (const RealTimeEvent& ev : log.events) {
    switch (ev.kind) {
      case EventKind::expose: {
        cut_checkpoint();
        if (!st.fetched(ev.item_id)) {
          fail("corrupt_data", "expose of unfetched item " + std::to_string(ev.item_id));
        }
        const int32_t page = st.page_of(ev.item_id);
        if (st.slot_of(ev.item_id) != st.exposures_on_page(page)) {
          fail("corrupt_data", "exposures on page " + std::to_string(page) +
                                   " are not an in-order prefix");
        }
        RankingSample r = to_ranking_sample(st.bundle_for(ev.item_id));
        sample_of_item[ev.item_id] = ranking->size();
        ranking->push_back(std::move(r));
        st.on_event(ev);
        if (st.exposures_on_page(page) % cfg.checkpoint_stride == 0) pending_checkpoint = true;
        break;
      }
      case EventKind::click:
        st.on_event(ev);
        (*ranking)[sample_of_item.at(ev.item_id)].click = 1;
        break;
      case EventKind::purchase: {
        st.on_event(ev);
        (*ranking)[sample_of_item.at(ev.item_id)].ctcvr = 1;
        const int32_t page = st.page_of(ev.item_id);
        auto& flags = orders[page];
        if (flags.empty()) flags.assign(page_size, 0);
        flags[st.slot_of(ev.item_id)] = 1;
        break;
      }
      case EventKind::page_request: {
        cut_checkpoint();
        auto it = pages.find(ev.page_index);
        if (it == pages.end()) {
          fail("corrupt_data", "request for page " + std::to_string(ev.page_index) +
                                   " has no page record");
        }
        st.on_event(ev);
        st.on_page(*it->second);
        break;
      }
      case EventKind::exit:
        cut_checkpoint();
        st.on_event(ev);
        break;
    }
  }
  cut_checkpoint();

  const std::vector<uint8_t> no_orders(page_size, 0);
  for (size_t i = supply_base; i < supply->size(); ++i) {
    SupplySample& s = (*supply)[i];
    auto it = orders.find(s.page_index);
    const SupplyLabels labels =
        make_supply_labels(it == orders.end() ? no_orders : it->second, s.window, cfg.objective);
    s.v_l = labels.v_l;
    s.v_g = labels.v_g;
    if (s.v_g < s.v_l) fail("corrupt_data", "supply labels violate V_g >= V_l");
  }
  for (size_t i = ranking_base; i < ranking->size(); ++i) {
    const RankingSample& r = (*ranking)[i];
    if (r.ctcvr > r.click) fail("corrupt_data", "purchase without click in emitted sample");
  }
}

// ---------------------------------------------------------------------------
// Encoding.
// ---------------------------------------------------------------------------

double stay_norm(double seconds) {
  const double s = std::clamp(seconds, 0.0, kStayCapSeconds);
  return std::log1p(s) / std::log1p(kStayCapSeconds);
}

double click_count_norm(int n) {
  return std::min(n, kClicksOnPageCap) / static_cast<double>(kClicksOnPageCap);
}

double purchase_count_norm(int n) {
  return std::min(n, kPurchasesCap) / static_cast<double>(kPurchasesCap);
}

FeatureTables::FeatureTables(ParameterStore& store, const std::string& prefix,
                             const FeatureSpace& space, Rng& rng)
    : item(store, prefix + ".emb.item", space.item_vocab(), space.emb_dim, rng),
      category(store, prefix + ".emb.category", space.category_vocab(), space.emb_dim, rng),
      position(store, prefix + ".emb.position", space.position_vocab(), space.emb_dim, rng),
      week(store, prefix + ".emb.week", space.week_vocab(), space.emb_dim, rng),
      hour(store, prefix + ".emb.hour", space.hour_vocab(), space.emb_dim, rng) {}

int64_t FeatureTables::param_count() const {
  return item.param_count() + category.param_count() + position.param_count() +
         week.param_count() + hour.param_count();
}

const ItemStatics& statics_for(const StaticsTable& statics, int32_t item_id) {
  static const ItemStatics oov{};
  if (item_id < 0 || static_cast<size_t>(item_id) >= statics.size()) return oov;
  return statics[item_id];
}

ClickSeqBatch build_click_seq(const std::vector<const std::vector<ClickEntry>*>& seqs) {
  if (seqs.empty()) fail("bad_argument", "empty click-sequence batch");
  ClickSeqBatch out;
  out.batch = static_cast<int64_t>(seqs.size());
  for (const auto* s : seqs) {
    out.steps = std::max(out.steps, static_cast<int64_t>(s->size()));
  }
  out.any = out.steps > 0;
  out.inv_len = Tensor::zeros(out.batch, 1);
  out.nonempty = Tensor::zeros(out.batch, 1);
  for (int64_t i = 0; i < out.batch; ++i) {
    const auto len = static_cast<int64_t>(seqs[i]->size());
    if (len > 0) {
      out.inv_len[i] = 1.0 / static_cast<double>(len);
      out.nonempty[i] = 1.0;
    }
  }
  out.item_rows.assign(out.steps, std::vector<int>(out.batch, 0));
  out.cate_rows.assign(out.steps, std::vector<int>(out.batch, 0));
  out.dense.assign(out.steps, Tensor::zeros(out.batch, 1));
  out.mask.assign(out.steps, Tensor::zeros(out.batch, 1));
  for (int64_t i = 0; i < out.batch; ++i) {
    const auto& seq = *seqs[i];
    const int64_t len = static_cast<int64_t>(seq.size());
    const int64_t pad = out.steps - len;  // left padding keeps the newest click last
    for (int64_t j = 0; j < len; ++j) {
      const int64_t t = pad + j;
      out.item_rows[t][i] = item_row(seq[j].item_id);
      out.cate_rows[t][i] = category_row(seq[j].category_id);
      out.dense[t][i] = stay_norm(seq[j].stay_seconds);
      out.mask[t][i] = 1.0;
    }
  }
  return out;
}

PageBatch build_page_batch(const std::vector<const std::vector<ItemRef>*>& pages,
                           const StaticsTable& statics) {
  if (pages.empty()) fail("bad_argument", "empty page batch");
  PageBatch out;
  out.batch = static_cast<int64_t>(pages.size());
  out.steps = static_cast<int64_t>(pages.front()->size());
  if (out.steps == 0) fail("bad_argument", "page encoder given an empty page");
  for (const auto* p : pages) {
    if (static_cast<int64_t>(p->size()) != out.steps) {
      fail("shape_mismatch", "page batch mixes page lengths");
    }
  }
  out.item_rows.assign(out.steps, std::vector<int>(out.batch, 0));
  out.cate_rows.assign(out.steps, std::vector<int>(out.batch, 0));
  out.dense.assign(out.steps, Tensor::zeros(out.batch, 2 + kStatsDim));
  for (int64_t i = 0; i < out.batch; ++i) {
    for (int64_t t = 0; t < out.steps; ++t) {
      const ItemRef& ref = (*pages[i])[t];
      const ItemStatics& st = statics_for(statics, ref.item_id);
      out.item_rows[t][i] = item_row(ref.item_id);
      out.cate_rows[t][i] = category_row(st.category_id);
      Tensor& d = out.dense[t];
      for (int k = 0; k < kStatsDim; ++k) d.at(i, k) = st.v_info[k];
      d.at(i, kStatsDim) = ref.p_ctr;
      d.at(i, kStatsDim + 1) = ref.p_cvr;
    }
  }
  return out;
}

TargetBatch build_target_batch(const std::vector<ItemRef>& items, const StaticsTable& statics) {
  if (items.empty()) fail("bad_argument", "empty target batch");
  TargetBatch out;
  const auto batch = static_cast<int64_t>(items.size());
  out.item_rows.resize(batch);
  out.cate_rows.resize(batch);
  out.dense = Tensor::zeros(batch, 2 + kStatsDim);
  for (int64_t i = 0; i < batch; ++i) {
    const ItemStatics& st = statics_for(statics, items[i].item_id);
    out.item_rows[i] = item_row(items[i].item_id);
    out.cate_rows[i] = category_row(st.category_id);
    for (int k = 0; k < kStatsDim; ++k) out.dense.at(i, k) = st.v_info[k];
    out.dense.at(i, kStatsDim) = items[i].p_ctr;
    out.dense.at(i, kStatsDim + 1) = items[i].p_cvr;
  }
  return out;
}

namespace {

RealtimeBatch build_realtime(const std::vector<int>& pos, const std::vector<int>& week,
                             const std::vector<int>& hour, const std::vector<int>& cop,
                             const std::vector<int>& pis) {
  if (pos.empty()) fail("bad_argument", "empty realtime batch");
  RealtimeBatch out;
  const auto batch = static_cast<int64_t>(pos.size());
  out.pos_rows.resize(batch);
  out.week_rows.resize(batch);
  out.hour_rows.resize(batch);
  out.dense = Tensor::zeros(batch, 2);
  for (int64_t i = 0; i < batch; ++i) {
    out.pos_rows[i] = position_row(pos[i]);
    out.week_rows[i] = week[i];
    out.hour_rows[i] = hour[i];
    out.dense.at(i, 0) = click_count_norm(cop[i]);
    out.dense.at(i, 1) = purchase_count_norm(pis[i]);
  }
  return out;
}

}  // namespace

RealtimeBatch build_realtime_batch(const std::vector<const RankingSample*>& rows) {
  std::vector<int> pos, week, hour, cop, pis;
  pos.reserve(rows.size());
  for (const auto* r : rows) {
    pos.push_back(r->position);
    week.push_back(r->week);
    hour.push_back(r->hour);
    cop.push_back(r->clicks_on_page);
    pis.push_back(r->purchases_in_session);
  }
  return build_realtime(pos, week, hour, cop, pis);
}

RealtimeBatch build_realtime_batch(const std::vector<const SupplySample*>& rows) {
  std::vector<int> pos, week, hour, cop, pis;
  pos.reserve(rows.size());
  for (const auto* r : rows) {
    pos.push_back(r->p_cv);
    week.push_back(r->week);
    hour.push_back(r->hour);
    cop.push_back(r->clicks_on_page);
    pis.push_back(r->purchases_in_session);
  }
  return build_realtime(pos, week, hour, cop, pis);
}

int64_t bundle_encoding_width(const FeatureSpace& space) {
  return 4 * space.emb_dim + kStatsDim + 5 + (2 * space.emb_dim + 1);
}

namespace {

struct BundleRow {
  int item_row = 0;
  int cate_row = 0;
  std::array<double, kStatsDim> v_info{};
  double p_ctr = 0.0;
  double p_cvr = 0.0;
  double pos_norm = 0.0;
  double clicks = 0.0;
  double purchases = 0.0;
  int week = 0;
  int hour = 0;
  const std::vector<ClickEntry>* seq = nullptr;
};

Value encode_bundle_rows(Tape& t, ParameterStore& store, const FeatureTables& tables,
                         const std::vector<BundleRow>& rows) {
  const auto batch = static_cast<int64_t>(rows.size());
  std::vector<int> item_rows(batch), cate_rows(batch), week_rows(batch), hour_rows(batch);
  Tensor mid = Tensor::zeros(batch, kStatsDim + 5);
  std::vector<const std::vector<ClickEntry>*> seqs(batch);
  for (int64_t i = 0; i < batch; ++i) {
    const BundleRow& r = rows[i];
    item_rows[i] = r.item_row;
    cate_rows[i] = r.cate_row;
    week_rows[i] = r.week;
    hour_rows[i] = r.hour;
    for (int k = 0; k < kStatsDim; ++k) mid.at(i, k) = r.v_info[k];
    mid.at(i, kStatsDim) = r.p_ctr;
    mid.at(i, kStatsDim + 1) = r.p_cvr;
    mid.at(i, kStatsDim + 2) = r.pos_norm;
    mid.at(i, kStatsDim + 3) = r.clicks;
    mid.at(i, kStatsDim + 4) = r.purchases;
    seqs[i] = r.seq;
  }

  const ClickSeqBatch cs = build_click_seq(seqs);
  const int64_t click_width = 2 * tables.item.dim() + 1;
  Value click_slot;
  if (cs.any) {
    std::vector<Value> xs;
    xs.reserve(cs.steps);
    for (int64_t step = 0; step < cs.steps; ++step) {
      xs.push_back(t.concat_cols({tables.item.lookup(t, store, cs.item_rows[step]),
                                  tables.category.lookup(t, store, cs.cate_rows[step]),
                                  t.input(cs.dense[step])}));
    }
    click_slot = masked_mean_rows(t, xs, cs.mask, cs.inv_len);
  } else {
    click_slot = t.input(Tensor::zeros(batch, click_width));
  }

  return t.concat_cols({tables.item.lookup(t, store, item_rows),
                        tables.category.lookup(t, store, cate_rows), t.input(mid),
                        tables.week.lookup(t, store, week_rows),
                        tables.hour.lookup(t, store, hour_rows), click_slot});
}

}  // namespace

Value encode_bundle(Tape& t, ParameterStore& store, const FeatureTables& tables,
                    const FeatureSpace& space, const FeatureBundle& bundle) {
  BundleRow r;
  r.item_row = item_row(bundle.target.item_id);
  r.cate_row = category_row(bundle.target.category_id);
  r.v_info = bundle.target.v_info;
  r.p_ctr = bundle.target.p_ctr;
  r.p_cvr = bundle.target.p_cvr;
  r.pos_norm = space.page_size > 0
                   ? bundle.target_position / static_cast<double>(space.page_size)
                   : 0.0;
  r.clicks = click_count_norm(bundle.clicks_on_page);
  r.purchases = purchase_count_norm(bundle.purchases_in_session);
  r.week = bundle.week;
  r.hour = bundle.hour;
  r.seq = &bundle.clicks;
  return encode_bundle_rows(t, store, tables, {r});
}

Value encode_bundle_batch(Tape& t, ParameterStore& store, const FeatureTables& tables,
                          const FeatureSpace& space, const std::vector<const RankingSample*>& rows,
                          const StaticsTable& statics) {
  if (rows.empty()) fail("bad_argument", "empty bundle batch");
  std::vector<BundleRow> brs(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const RankingSample& s = *rows[i];
    const ItemStatics& st = statics_for(statics, s.target.item_id);
    BundleRow& r = brs[i];
    r.item_row = item_row(s.target.item_id);
    r.cate_row = category_row(st.category_id);
    r.v_info = st.v_info;
    r.p_ctr = s.target.p_ctr;
    r.p_cvr = s.target.p_cvr;
    r.pos_norm = space.page_size > 0 ? s.position / static_cast<double>(space.page_size) : 0.0;
    r.clicks = click_count_norm(s.clicks_on_page);
    r.purchases = purchase_count_norm(s.purchases_in_session);
    r.week = s.week;
    r.hour = s.hour;
    r.seq = &s.seq;
  }
  return encode_bundle_rows(t, store, tables, brs);
}

// ---------------------------------------------------------------------------
// Session log JSON.
// ---------------------------------------------------------------------------

namespace {

ordered_json item_to_json(const ItemFeatures& it) {
  ordered_json j;
  j["id"] = it.item_id;
  j["cate"] = it.category_id;
  j["info"] = it.v_info;
  j["p_ctr"] = it.p_ctr;
  j["p_cvr"] = it.p_cvr;
  return j;
}

ItemFeatures item_from_json(const ordered_json& j) {
  ItemFeatures it;
  it.item_id = j.at("id").get<int32_t>();
  it.category_id = j.at("cate").get<int32_t>();
  const auto& info = j.at("info");
  if (!info.is_array() || info.size() != kStatsDim) fail("corrupt_data", "bad stats vector");
  for (int k = 0; k < kStatsDim; ++k) it.v_info[k] = info[k].get<double>();
  it.p_ctr = j.at("p_ctr").get<double>();
  it.p_cvr = j.at("p_cvr").get<double>();
  return it;
}

ordered_json event_to_json(const RealTimeEvent& ev) {
  ordered_json j;
  j["kind"] = event_kind_name(ev.kind);
  j["t"] = ev.t_offset;
  switch (ev.kind) {
    case EventKind::expose:
      j["item"] = ev.item_id;
      j["page"] = ev.page_index;
      j["pos"] = ev.position;
      break;
    case EventKind::click:
      j["item"] = ev.item_id;
      j["stay"] = ev.stay_seconds;
      break;
    case EventKind::purchase:
      j["item"] = ev.item_id;
      break;
    case EventKind::page_request:
      j["page"] = ev.page_index;
      j["trigger"] = trigger_name(ev.trigger);
      break;
    case EventKind::exit:
      break;
  }
  return j;
}

RealTimeEvent event_from_json(const ordered_json& j) {
  RealTimeEvent ev;
  ev.kind = event_kind_from_name(j.at("kind").get<std::string>());
  ev.t_offset = j.at("t").get<double>();
  switch (ev.kind) {
    case EventKind::expose:
      ev.item_id = j.at("item").get<int32_t>();
      ev.page_index = j.at("page").get<int32_t>();
      ev.position = j.at("pos").get<int32_t>();
      break;
    case EventKind::click:
      ev.item_id = j.at("item").get<int32_t>();
      ev.stay_seconds = j.at("stay").get<double>();
      break;
    case EventKind::purchase:
      ev.item_id = j.at("item").get<int32_t>();
      break;
    case EventKind::page_request:
      ev.page_index = j.at("page").get<int32_t>();
      ev.trigger = trigger_from_name(j.at("trigger").get<std::string>());
      break;
    case EventKind::exit:
      break;
  }
  return ev;
}

}  // namespace

std::string session_log_to_json_line(const SessionLog& log) {
  ordered_json j;
  j["session"] = log.session_id;
  j["user"] = log.user_id;
  j["scene"] = scene_name(log.scene);
  j["week"] = log.week;
  j["hour"] = log.hour;
  j["start_minutes"] = log.start_minutes;
  ordered_json pages = ordered_json::array();
  for (const PageRecord& p : log.pages) {
    ordered_json pj;
    pj["index"] = p.page_index;
    ordered_json items = ordered_json::array();
    for (const ItemFeatures& it : p.items) items.push_back(item_to_json(it));
    pj["items"] = std::move(items);
    pages.push_back(std::move(pj));
  }
  j["pages"] = std::move(pages);
  ordered_json events = ordered_json::array();
  for (const RealTimeEvent& ev : log.events) events.push_back(event_to_json(ev));
  j["events"] = std::move(events);
  return j.dump();
}

SessionLog session_log_from_json_line(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
    SessionLog log;
    log.session_id = j.at("session").get<int64_t>();
    log.user_id = j.at("user").get<int64_t>();
    const std::string scene = j.at("scene").get<std::string>();
    if (scene == "android") {
      log.scene = Scene::android;
    } else if (scene == "ios") {
      log.scene = Scene::ios;
    } else {
      fail("corrupt_data", "unknown scene '" + scene + "'");
    }
    log.week = j.at("week").get<int32_t>();
    log.hour = j.at("hour").get<int32_t>();
    log.start_minutes = j.at("start_minutes").get<double>();
    for (const auto& pj : j.at("pages")) {
      PageRecord p;
      p.page_index = pj.at("index").get<int32_t>();
      for (const auto& ij : pj.at("items")) p.items.push_back(item_from_json(ij));
      log.pages.push_back(std::move(p));
    }
    for (const auto& ej : j.at("events")) log.events.push_back(event_from_json(ej));
    return log;
  } catch (const ordered_json::exception& e) {
    fail("corrupt_data", std::string("session log parse: ") + e.what());
  }
}

void write_session_logs(const std::string& path, const std::vector<SessionLog>& logs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io_error", "cannot open '" + path + "' for writing");
  for (const SessionLog& log : logs) out << session_log_to_json_line(log) << '\n';
  if (!out) fail("io_error", "write failed on '" + path + "'");
}

std::vector<SessionLog> read_session_logs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io_error", "cannot open '" + path + "'");
  std::vector<SessionLog> logs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    logs.push_back(session_log_from_json_line(line));
  }
  return logs;
}

// ---------------------------------------------------------------------------
// Compact sample files. One record per line, space separated, header line
// pins the schema version. This keeps million-row files cheap to parse.
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kRankingHeader = "# edgesim.ranking.v1";
constexpr const char* kSupplyHeader = "# edgesim.supply.v1";

struct LineWriter {
  std::FILE* f = nullptr;
  std::string path;

  LineWriter(const std::string& p) : path(p) {
    f = std::fopen(p.c_str(), "wb");
    if (!f) fail("io_error", "cannot open '" + p + "' for writing");
  }
  ~LineWriter() {
    if (f) std::fclose(f);
  }
  void close() {
    if (std::fclose(f) != 0) {
      f = nullptr;
      fail("io_error", "write failed on '" + path + "'");
    }
    f = nullptr;
  }
};

void put_i(std::string& s, int64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%" PRId64 " ", v);
  s += buf;
}

void put_d(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g ", v);
  s += buf;
}

struct LineParser {
  const char* p;
  size_t line_no;

  int64_t i64() {
    char* end = nullptr;
    const long long v = std::strtoll(p, &end, 10);
    if (end == p) fail("corrupt_data", "bad integer on sample line " + std::to_string(line_no));
    p = end;
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(i64()); }
  double f64() {
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p || !std::isfinite(v)) {
      fail("corrupt_data", "bad number on sample line " + std::to_string(line_no));
    }
    p = end;
    return v;
  }
  void done() {
    while (*p == ' ') ++p;
    if (*p != '\0') fail("corrupt_data", "trailing data on sample line " + std::to_string(line_no));
  }
};

Scene parse_scene(int v, size_t line_no) {
  if (v != 0 && v != 1) fail("corrupt_data", "bad scene on sample line " + std::to_string(line_no));
  return static_cast<Scene>(v);
}

int32_t checked_count(int64_t v, int64_t cap, size_t line_no) {
  if (v < 0 || v > cap) fail("corrupt_data", "bad count on sample line " + std::to_string(line_no));
  return static_cast<int32_t>(v);
}

void put_seq(std::string& s, const std::vector<ClickEntry>& seq) {
  put_i(s, static_cast<int64_t>(seq.size()));
  for (const ClickEntry& c : seq) {
    put_i(s, c.item_id);
    put_i(s, c.category_id);
    put_d(s, c.stay_seconds);
  }
}

std::vector<ClickEntry> parse_seq(LineParser& lp) {
  const int32_t n = checked_count(lp.i64(), 1024, lp.line_no);
  std::vector<ClickEntry> seq(n);
  for (auto& c : seq) {
    c.item_id = lp.i32();
    c.category_id = lp.i32();
    c.stay_seconds = lp.f64();
  }
  return seq;
}

void check_header(std::ifstream& in, const char* expected, const std::string& path) {
  std::string line;
  if (!std::getline(in, line) || line != expected) {
    fail("corrupt_data", "'" + path + "' lacks header '" + expected + "'");
  }
}

}  // namespace

void write_ranking_samples(const std::string& path, const std::vector<RankingSample>& rows) {
  LineWriter w(path);
  std::fputs(kRankingHeader, w.f);
  std::fputc('\n', w.f);
  std::string line;
  for (const RankingSample& r : rows) {
    line.clear();
    put_i(line, r.session_id);
    put_i(line, r.user_id);
    put_i(line, static_cast<int>(r.scene));
    put_i(line, r.week);
    put_i(line, r.hour);
    put_i(line, r.position);
    put_i(line, r.clicks_on_page);
    put_i(line, r.purchases_in_session);
    put_i(line, r.click);
    put_i(line, r.ctcvr);
    put_i(line, r.target.item_id);
    put_d(line, r.target.p_ctr);
    put_d(line, r.target.p_cvr);
    put_seq(line, r.seq);
    line.back() = '\n';
    std::fputs(line.c_str(), w.f);
  }
  w.close();
}

std::vector<RankingSample> read_ranking_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io_error", "cannot open '" + path + "'");
  check_header(in, kRankingHeader, path);
  std::vector<RankingSample> rows;
  std::string line;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    LineParser lp{line.c_str(), line_no};
    RankingSample r;
    r.session_id = lp.i64();
    r.user_id = lp.i64();
    r.scene = parse_scene(lp.i32(), line_no);
    r.week = lp.i32();
    r.hour = lp.i32();
    r.position = lp.i32();
    r.clicks_on_page = lp.i32();
    r.purchases_in_session = lp.i32();
    r.click = lp.i32();
    r.ctcvr = lp.i32();
    r.target.item_id = lp.i32();
    r.target.p_ctr = lp.f64();
    r.target.p_cvr = lp.f64();
    r.seq = parse_seq(lp);
    lp.done();
    if (r.ctcvr > r.click) fail("corrupt_data", "sample line " + std::to_string(line_no) +
                                                    " has a purchase without a click");
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_supply_samples(const std::string& path, const std::vector<SupplySample>& rows) {
  LineWriter w(path);
  std::fputs(kSupplyHeader, w.f);
  std::fputc('\n', w.f);
  std::string line;
  for (const SupplySample& s : rows) {
    line.clear();
    put_i(line, s.session_id);
    put_i(line, s.user_id);
    put_i(line, static_cast<int>(s.scene));
    put_i(line, s.week);
    put_i(line, s.hour);
    put_i(line, s.page_index);
    put_i(line, s.p_cv);
    put_i(line, s.window);
    put_i(line, s.clicks_on_page);
    put_i(line, s.purchases_in_session);
    put_i(line, s.v_l);
    put_i(line, s.v_g);
    put_i(line, static_cast<int64_t>(s.page.size()));
    for (const ItemRef& ref : s.page) {
      put_i(line, ref.item_id);
      put_d(line, ref.p_ctr);
      put_d(line, ref.p_cvr);
    }
    put_seq(line, s.seq);
    line.back() = '\n';
    std::fputs(line.c_str(), w.f);
  }
  w.close();
}

std::vector<SupplySample> read_supply_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io_error", "cannot open '" + path + "'");
  check_header(in, kSupplyHeader, path);
  std::vector<SupplySample> rows;
  std::string line;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    LineParser lp{line.c_str(), line_no};
    SupplySample s;
    s.session_id = lp.i64();
    s.user_id = lp.i64();
    s.scene = parse_scene(lp.i32(), line_no);
    s.week = lp.i32();
    s.hour = lp.i32();
    s.page_index = lp.i32();
    s.p_cv = lp.i32();
    s.window = lp.i32();
    s.clicks_on_page = lp.i32();
    s.purchases_in_session = lp.i32();
    s.v_l = lp.i32();
    s.v_g = lp.i32();
    const int32_t n = checked_count(lp.i64(), 4096, line_no);
    s.page.resize(n);
    for (auto& ref : s.page) {
      ref.item_id = lp.i32();
      ref.p_ctr = lp.f64();
      ref.p_cvr = lp.f64();
    }
    s.seq = parse_seq(lp);
    lp.done();
    if (s.v_g < s.v_l) fail("corrupt_data", "sample line " + std::to_string(line_no) +
                                                " violates V_g >= V_l");
    if (s.window < 0 || s.window > n) {
      fail("corrupt_data", "sample line " + std::to_string(line_no) + " has a bad window");
    }
    rows.push_back(std::move(s));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV exports for inspection.
// ---------------------------------------------------------------------------

namespace {

std::string seq_field(const std::vector<ClickEntry>& seq) {
  std::string s;
  char buf[64];
  for (const ClickEntry& c : seq) {
    if (!s.empty()) s += ';';
    std::snprintf(buf, sizeof buf, "%d:%.6g", c.item_id, c.stay_seconds);
    s += buf;
  }
  return s;
}

}  // namespace

void write_ranking_samples_csv(const std::string& path, const std::vector<RankingSample>& rows,
                               const StaticsTable& statics, size_t limit) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io_error", "cannot open '" + path + "' for writing");
  out << "session,user,scene,week,hour,position,clicks_on_page,purchases,click,ctcvr,"
         "item,category,p_ctr,p_cvr,click_seq\n";
  char buf[64];
  const size_t n = std::min(limit, rows.size());
  for (size_t i = 0; i < n; ++i) {
    const RankingSample& r = rows[i];
    out << r.session_id << ',' << r.user_id << ',' << scene_name(r.scene) << ',' << r.week << ','
        << r.hour << ',' << r.position << ',' << r.clicks_on_page << ','
        << r.purchases_in_session << ',' << r.click << ',' << r.ctcvr << ',' << r.target.item_id
        << ',' << statics_for(statics, r.target.item_id).category_id << ',';
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,", r.target.p_ctr, r.target.p_cvr);
    out << buf << seq_field(r.seq) << '\n';
  }
  if (!out) fail("io_error", "write failed on '" + path + "'");
}

void write_supply_samples_csv(const std::string& path, const std::vector<SupplySample>& rows,
                              size_t limit) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io_error", "cannot open '" + path + "' for writing");
  out << "session,user,scene,week,hour,page,p_cv,window,clicks_on_page,purchases,v_l,v_g,"
         "page_items,click_seq\n";
  const size_t n = std::min(limit, rows.size());
  for (size_t i = 0; i < n; ++i) {
    const SupplySample& s = rows[i];
    out << s.session_id << ',' << s.user_id << ',' << scene_name(s.scene) << ',' << s.week << ','
        << s.hour << ',' << s.page_index << ',' << s.p_cv << ',' << s.window << ','
        << s.clicks_on_page << ',' << s.purchases_in_session << ',' << s.v_l << ',' << s.v_g
        << ',';
    std::string items;
    for (const ItemRef& ref : s.page) {
      if (!items.empty()) items += ';';
      items += std::to_string(ref.item_id);
    }
    out << items << ',' << seq_field(s.seq) << '\n';
  }
  if (!out) fail("io_error", "write failed on '" + path + "'");
}

}  // namespace edgesim
