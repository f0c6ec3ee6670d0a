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
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "edgesim/error.hpp"
#include "edgesim/features.hpp"
#include "gradcheck.hpp"

using namespace edgesim;

namespace {

ItemFeatures mk_item(int id, int cate, double p_ctr, double p_cvr) {
  ItemFeatures it;
  it.item_id = id;
  it.category_id = cate;
  it.v_info = {0.1, 0.2, 0.3, 0.4};
  it.p_ctr = p_ctr;
  it.p_cvr = p_cvr;
  return it;
}

PageRecord mk_page(int index, int first_id, int n) {
  PageRecord p;
  p.page_index = index;
  for (int j = 0; j < n; ++j) {
    p.items.push_back(mk_item(first_id + j, (first_id + j) % 5, 0.2 + 0.001 * j, 0.1));
  }
  return p;
}

RealTimeEvent ev_request(int page, Trigger trig = Trigger::manual) {
  RealTimeEvent ev;
  ev.kind = EventKind::page_request;
  ev.page_index = page;
  ev.trigger = trig;
  return ev;
}

RealTimeEvent ev_expose(const PageRecord& page, int slot) {
  RealTimeEvent ev;
  ev.kind = EventKind::expose;
  ev.item_id = page.items[slot].item_id;
  ev.page_index = page.page_index;
  ev.position = slot;
  return ev;
}

RealTimeEvent ev_click(int item, double stay) {
  RealTimeEvent ev;
  ev.kind = EventKind::click;
  ev.item_id = item;
  ev.stay_seconds = stay;
  return ev;
}

RealTimeEvent ev_purchase(int item) {
  RealTimeEvent ev;
  ev.kind = EventKind::purchase;
  ev.item_id = item;
  return ev;
}

RealTimeEvent ev_exit() {
  RealTimeEvent ev;
  ev.kind = EventKind::exit;
  return ev;
}

// Two full pages of 12, clicks on items 2 and 7, purchases on 2 and 105.
SessionLog two_page_log() {
  SessionLog log;
  log.session_id = 77;
  log.user_id = 900;
  log.scene = Scene::ios;
  log.week = 3;
  log.hour = 21;
  log.pages.push_back(mk_page(0, 0, 12));
  log.pages.push_back(mk_page(1, 100, 12));
  log.events.push_back(ev_request(0));
  for (int slot = 0; slot < 12; ++slot) {
    log.events.push_back(ev_expose(log.pages[0], slot));
    if (slot == 2) {
      log.events.push_back(ev_click(2, 12.0));
      log.events.push_back(ev_purchase(2));
    }
    if (slot == 7) log.events.push_back(ev_click(7, 30.0));
  }
  log.events.push_back(ev_request(1));
  for (int slot = 0; slot < 12; ++slot) {
    log.events.push_back(ev_expose(log.pages[1], slot));
    if (slot == 5) {
      log.events.push_back(ev_click(105, 45.0));
      log.events.push_back(ev_purchase(105));
    }
  }
  log.events.push_back(ev_exit());
  return log;
}

StaticsTable statics_from_log(const SessionLog& log) {
  StaticsTable table(400);
  for (const auto& page : log.pages) {
    for (const auto& it : page.items) {
      table[it.item_id] = ItemStatics{it.category_id, it.v_info};
    }
  }
  return table;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("session state tracks device context") {
  SessionState st(1, 2, Scene::android, 4, 9, 12);
  const PageRecord page0 = mk_page(0, 0, 12);

  // Cold start: time features present, everything else empty.
  st.on_event(ev_request(0));
  st.on_page(page0);
  FeatureBundle fresh = st.bundle_for(3);
  CHECK(fresh.clicks.empty());
  CHECK(fresh.week == 4);
  CHECK(fresh.hour == 9);
  CHECK(fresh.p_cv == 0);
  CHECK(fresh.target_position == 3);
  CHECK(fresh.page_size == 12);

  st.on_event(ev_expose(page0, 0));
  st.on_event(ev_expose(page0, 1));
  st.on_event(ev_click(1, 12.0));
  CHECK(st.p_cv() == 1);
  CHECK(st.clicks_on_page() == 1);

  FeatureBundle b = st.bundle_for(5);
  REQUIRE(b.clicks.size() == 1);
  CHECK(b.clicks[0].item_id == 1);
  CHECK(b.clicks[0].category_id == 1 % 5);
  CHECK(b.clicks[0].stay_seconds == 12.0);
  CHECK(b.clicks_on_page == 1);

  // Click counter resets on the next fetch; the session counter does not.
  st.on_event(ev_purchase(1));
  st.on_event(ev_request(1));
  st.on_page(mk_page(1, 100, 12));
  CHECK(st.clicks_on_page() == 0);
  CHECK(st.purchases_in_session() == 1);

  CHECK_THROWS_AS(st.bundle_for(1), Error);    // already exposed
  CHECK_THROWS_AS(st.bundle_for(999), Error);  // never fetched
}

TEST_CASE("session state rejects malformed event streams") {
  const PageRecord page0 = mk_page(0, 0, 12);

  SessionState st(1, 2, Scene::android, 0, 0, 12);
  st.on_page(page0);
  CHECK_THROWS_WITH_AS(st.on_event(ev_click(0, 5.0)), doctest::Contains("unexposed"), Error);
  st.on_event(ev_expose(page0, 0));
  CHECK_THROWS_WITH_AS(st.on_event(ev_purchase(0)), doctest::Contains("without click"), Error);
  CHECK_THROWS_WITH_AS(st.on_event(ev_expose(page0, 0)), doctest::Contains("twice"), Error);
  CHECK_THROWS_AS(st.on_page(page0), Error);  // page index must increase

  RealTimeEvent bad = ev_expose(page0, 3);
  bad.position = 4;  // disagrees with placement
  CHECK_THROWS_AS(st.on_event(bad), Error);
}

TEST_CASE("click sequence is a ring buffer of the newest n") {
  SessionState st(1, 2, Scene::android, 0, 0, 12, 10);
  const PageRecord page0 = mk_page(0, 0, 12);
  st.on_page(page0);
  for (int slot = 0; slot < 11; ++slot) {
    st.on_event(ev_expose(page0, slot));
    st.on_event(ev_click(slot, 1.0 + slot));
  }
  const auto seq = st.click_seq();
  REQUIRE(seq.size() == 10);
  CHECK(seq.front().item_id == 1);  // oldest click dropped
  CHECK(seq.back().item_id == 10);
}

TEST_CASE("supply labels count orders inside and outside the window") {
  std::vector<uint8_t> orders(20, 0);
  orders[2] = 1;
  orders[15] = 1;

  SupplyLabels g = make_supply_labels(orders, 8, SupplyObjective::general);
  CHECK(g.v_l == 1);
  CHECK(g.v_g == 2);
  SupplyLabels s = make_supply_labels(orders, 8, SupplyObjective::special);
  CHECK(s.v_l == 1);
  CHECK(s.v_g == 1);

  const std::vector<uint8_t> none(20, 0);
  SupplyLabels z = make_supply_labels(none, 8, SupplyObjective::general);
  CHECK(z.v_l == 0);
  CHECK(z.v_g == 0);

  std::vector<uint8_t> deep(20, 0);
  deep[15] = 1;
  SupplyLabels d = make_supply_labels(deep, 8, SupplyObjective::special);
  CHECK(d.v_l == 0);
  CHECK(d.v_g == 1);

  CHECK_THROWS_AS(make_supply_labels(orders, -1, SupplyObjective::special), Error);
  CHECK_THROWS_AS(make_supply_labels(orders, 21, SupplyObjective::special), Error);
}

TEST_CASE("emission: checkpoints, windows, and labels") {
  const SessionLog log = two_page_log();
  EmitConfig cfg;  // special objective, stride 4
  const EmittedSamples out = emit_training_logs(log, cfg);

  // Two pages, three checkpoints each (windows 4, 8, 12).
  REQUIRE(out.supply.size() == 6);
  for (int i = 0; i < 6; ++i) {
    const SupplySample& s = out.supply[i];
    CHECK(s.page_index == i / 3);
    CHECK(s.window == 4 * (i % 3 + 1));
    CHECK(s.p_cv == s.window - 1);
    CHECK(s.page.size() == 12);
    CHECK(s.v_g >= s.v_l);
  }
  // Page 0 order sits at slot 2, inside every window.
  CHECK(out.supply[0].v_l == 1);
  CHECK(out.supply[0].v_g == 1);
  // Page 1 order sits at slot 5: outside the first window only.
  CHECK(out.supply[3].v_l == 0);
  CHECK(out.supply[3].v_g == 1);
  CHECK(out.supply[4].v_l == 1);

  // Context at the first checkpoint: the slot-2 click is already visible.
  CHECK(out.supply[0].clicks_on_page == 1);
  CHECK(out.supply[0].purchases_in_session == 1);
  REQUIRE(out.supply[0].seq.size() == 1);
  CHECK(out.supply[0].seq[0].item_id == 2);
  // Page 1 contexts carry both earlier clicks but a reset page counter.
  CHECK(out.supply[3].clicks_on_page == 0);
  CHECK(out.supply[3].seq.size() == 2);

  // One ranking sample per exposure, labels mapped per item.
  REQUIRE(out.ranking.size() == 24);
  auto find = [&](int id) -> const RankingSample& {
    for (const auto& r : out.ranking) {
      if (r.target.item_id == id) return r;
    }
    FAIL("missing sample");
    return out.ranking[0];
  };
  CHECK(find(2).click == 1);
  CHECK(find(2).ctcvr == 1);
  CHECK(find(7).click == 1);
  CHECK(find(7).ctcvr == 0);
  CHECK(find(0).click == 0);
  CHECK(find(0).ctcvr == 0);
  CHECK(find(105).position == 5);
  // Exposure context predates the exposure's own click.
  CHECK(find(2).seq.empty());
  CHECK(find(3).seq.size() == 1);
  // Page-1 exposures see both page-0 clicks and a reset page counter.
  CHECK(find(100).seq.size() == 2);
  CHECK(find(100).clicks_on_page == 0);
  CHECK(find(100).purchases_in_session == 1);
  for (const auto& r : out.ranking) CHECK(r.ctcvr <= r.click);
}

TEST_CASE("emission rejects corrupt logs") {
  {
    SessionLog log = two_page_log();
    // Purchase an item that was never clicked.
    log.events.insert(log.events.end() - 1, ev_purchase(101));
    CHECK_THROWS_WITH_AS(emit_training_logs(log, EmitConfig{}),
                         doctest::Contains("without click"), Error);
  }
  {
    SessionLog log = two_page_log();
    std::swap(log.events[2], log.events[3]);  // break the in-order prefix
    CHECK_THROWS_AS(emit_training_logs(log, EmitConfig{}), Error);
  }
  {
    SessionLog log = two_page_log();
    log.pages.pop_back();  // request for page 1 now dangles
    CHECK_THROWS_WITH_AS(emit_training_logs(log, EmitConfig{}),
                         doctest::Contains("no page record"), Error);
  }
}

TEST_CASE("general objective keeps order counts") {
  SessionLog log = two_page_log();
  // Add a second order on page 0 at slot 7.
  auto it = log.events.begin();
  while (!(it->kind == EventKind::click && it->item_id == 7)) ++it;
  log.events.insert(it + 1, ev_purchase(7));

  EmitConfig cfg;
  cfg.objective = SupplyObjective::general;
  const EmittedSamples out = emit_training_logs(log, cfg);
  REQUIRE(out.supply.size() == 6);
  CHECK(out.supply[0].v_l == 1);  // window 4: slot 2 only
  CHECK(out.supply[0].v_g == 2);
  CHECK(out.supply[1].v_l == 2);  // window 8 includes slot 7
  CHECK(out.supply[1].v_g == 2);
}

TEST_CASE("emission is deterministic and round-trips through files") {
  const SessionLog log = two_page_log();
  const EmittedSamples a = emit_training_logs(log, EmitConfig{});
  const EmittedSamples b = emit_training_logs(log, EmitConfig{});

  const std::string p1 = tmp_path("edgesim_rank_a.txt");
  const std::string p2 = tmp_path("edgesim_rank_b.txt");
  write_ranking_samples(p1, a.ranking);
  write_ranking_samples(p2, b.ranking);
  CHECK(slurp(p1) == slurp(p2));

  const std::vector<RankingSample> back = read_ranking_samples(p1);
  const std::string p3 = tmp_path("edgesim_rank_c.txt");
  write_ranking_samples(p3, back);
  CHECK(slurp(p1) == slurp(p3));

  const std::string s1 = tmp_path("edgesim_supply_a.txt");
  write_supply_samples(s1, a.supply);
  const std::vector<SupplySample> sback = read_supply_samples(s1);
  const std::string s2 = tmp_path("edgesim_supply_b.txt");
  write_supply_samples(s2, sback);
  CHECK(slurp(s1) == slurp(s2));
  REQUIRE(sback.size() == a.supply.size());
  CHECK(sback[3].v_g == 1);
  CHECK(sback[3].page.size() == 12);
  CHECK(sback[3].seq.size() == 2);

  for (const auto& p : {p1, p2, p3, s1, s2}) std::remove(p.c_str());
}

TEST_CASE("sample files reject corruption") {
  const std::string path = tmp_path("edgesim_bad_samples.txt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "# wrong header\n";
  }
  CHECK_THROWS_WITH_AS(read_ranking_samples(path), doctest::Contains("header"), Error);
  {
    std::ofstream out(path, std::ios::binary);
    out << "# edgesim.ranking.v1\n1 2 0 3 21 5 0 0 1\n";  // truncated record
  }
  CHECK_THROWS_AS(read_ranking_samples(path), Error);
  {
    // click=0 but ctcvr=1
    std::ofstream out(path, std::ios::binary);
    out << "# edgesim.ranking.v1\n1 2 0 3 21 5 0 0 0 1 9 0.5 0.5 0\n";
  }
  CHECK_THROWS_AS(read_ranking_samples(path), Error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_ranking_samples(path), Error);  // missing file
}

TEST_CASE("session logs round-trip through json lines") {
  const SessionLog log = two_page_log();
  const std::string line = session_log_to_json_line(log);
  const SessionLog back = session_log_from_json_line(line);
  CHECK(session_log_to_json_line(back) == line);
  CHECK(back.pages.size() == 2);
  CHECK(back.events.size() == log.events.size());
  CHECK(back.scene == Scene::ios);

  const std::string path = tmp_path("edgesim_logs.ndjson");
  write_session_logs(path, {log, log});
  const auto logs = read_session_logs(path);
  REQUIRE(logs.size() == 2);
  CHECK(session_log_to_json_line(logs[1]) == line);
  std::remove(path.c_str());

  CHECK_THROWS_AS(session_log_from_json_line("{"), Error);
  CHECK_THROWS_AS(session_log_from_json_line("{\"session\":1}"), Error);
}

TEST_CASE("click sequence batching pads on the left") {
  std::vector<ClickEntry> a = {{4, 1, 10.0}, {5, 2, 20.0}};
  std::vector<ClickEntry> b = {{6, 0, 1.0}, {7, 1, 2.0}, {8, 2, 3.0}, {9, 3, 4.0}, {10, 4, 5.0}};
  std::vector<ClickEntry> empty;
  const ClickSeqBatch cs = build_click_seq({&a, &b, &empty});

  CHECK(cs.batch == 3);
  CHECK(cs.steps == 5);
  CHECK(cs.any);
  // Row 0: three pads then the two real clicks, newest last.
  CHECK(cs.mask[0][0] == 0.0);
  CHECK(cs.mask[2][0] == 0.0);
  CHECK(cs.mask[3][0] == 1.0);
  CHECK(cs.item_rows[3][0] == 4 + 1);
  CHECK(cs.item_rows[4][0] == 5 + 1);
  CHECK(cs.dense[4][0] == doctest::Approx(stay_norm(20.0)));
  // Row 1 is full.
  for (int t = 0; t < 5; ++t) CHECK(cs.mask[t][1] == 1.0);
  // Row 2 is empty everywhere.
  for (int t = 0; t < 5; ++t) CHECK(cs.mask[t][2] == 0.0);
  CHECK(cs.inv_len[0] == doctest::Approx(0.5));
  CHECK(cs.inv_len[1] == doctest::Approx(0.2));
  CHECK(cs.inv_len[2] == 0.0);
  CHECK(cs.nonempty[2] == 0.0);

  const ClickSeqBatch all_empty = build_click_seq({&empty});
  CHECK_FALSE(all_empty.any);
  CHECK(all_empty.steps == 0);
}

TEST_CASE("realtime and target batches normalize counters") {
  RankingSample r;
  r.position = 7;
  r.week = 3;
  r.hour = 21;
  r.clicks_on_page = 15;  // above cap
  r.purchases_in_session = 2;
  const RealtimeBatch rb = build_realtime_batch(std::vector<const RankingSample*>{&r});
  CHECK(rb.pos_rows[0] == 8);
  CHECK(rb.week_rows[0] == 3);
  CHECK(rb.hour_rows[0] == 21);
  CHECK(rb.dense.at(0, 0) == 1.0);
  CHECK(rb.dense.at(0, 1) == doctest::Approx(0.4));

  StaticsTable statics(10);
  statics[4] = ItemStatics{2, {0.5, 0.6, 0.7, 0.8}};
  const TargetBatch tb = build_target_batch({ItemRef{4, 0.25, 0.125}}, statics);
  CHECK(tb.item_rows[0] == 5);
  CHECK(tb.cate_rows[0] == 3);
  CHECK(tb.dense.at(0, 0) == 0.5);
  CHECK(tb.dense.at(0, 4) == 0.25);
  CHECK(tb.dense.at(0, 5) == 0.125);

  // Unknown items take the reserved OOV path.
  const TargetBatch oov = build_target_batch({ItemRef{-1, 0.1, 0.1}}, statics);
  CHECK(oov.item_rows[0] == 0);
  CHECK(oov.cate_rows[0] == 0);
}

TEST_CASE("bundle encoding: layout, determinism, empty-click slot") {
  Rng rng(derive_seed(11, "bundle-enc"));
  ParameterStore store;
  FeatureSpace space;
  space.n_items = 50;
  space.n_categories = 6;
  space.page_size = 20;
  FeatureTables tables(store, "enc", space, rng);
  CHECK(bundle_encoding_width(space) == 58);

  FeatureBundle b;
  b.scene = Scene::android;
  b.week = 2;
  b.hour = 13;
  b.target = mk_item(9, 3, 0.3, 0.05);
  b.target_position = 5;
  b.p_cv = 4;
  b.page_size = 20;
  b.clicks_on_page = 2;
  b.purchases_in_session = 0;

  Tape t1;
  const Tensor& row = t1.value(encode_bundle(t1, store, tables, space, b));
  REQUIRE(row.rows() == 1);
  REQUIRE(row.cols() == 58);
  CHECK(row[kBundleCtrOffset] == 0.3);       // p_ctr verbatim
  CHECK(row[kBundleCtrOffset + 1] == 0.05);  // p_cvr verbatim
  CHECK(row[22] == doctest::Approx(5.0 / 20.0));
  CHECK(row[23] == doctest::Approx(0.2));
  for (int c = 41; c < 58; ++c) CHECK(row[c] == 0.0);  // empty click slot

  // Same bundle, fresh tape: bit-identical.
  Tape t2;
  const Tensor& row2 = t2.value(encode_bundle(t2, store, tables, space, b));
  CHECK(std::memcmp(row.data(), row2.data(), sizeof(double) * 58) == 0);

  // With clicks the slot becomes the mean of the step encodings.
  b.clicks = {{9, 3, 10.0}, {12, 1, 40.0}};
  Tape t3;
  const Tensor& row3 = t3.value(encode_bundle(t3, store, tables, space, b));
  const Tensor& items = store.get("enc.emb.item");
  const Tensor& cates = store.get("enc.emb.category");
  for (int k = 0; k < 8; ++k) {
    const double want = 0.5 * (items.at(10, k) + items.at(13, k));
    CHECK(row3[41 + k] == doctest::Approx(want).epsilon(1e-12));
    const double wantc = 0.5 * (cates.at(4, k) + cates.at(2, k));
    CHECK(row3[49 + k] == doctest::Approx(wantc).epsilon(1e-12));
  }
  CHECK(row3[57] == doctest::Approx(0.5 * (stay_norm(10.0) + stay_norm(40.0))));
  for (int c = 0; c < 41; ++c) CHECK(row3[c] == row[c]);
}

TEST_CASE("batched bundle encoding matches the single path") {
  const SessionLog log = two_page_log();
  const StaticsTable statics = statics_from_log(log);
  const EmittedSamples out = emit_training_logs(log, EmitConfig{});

  Rng rng(derive_seed(12, "bundle-batch"));
  ParameterStore store;
  FeatureSpace space;
  space.n_items = 400;
  space.n_categories = 5;
  space.page_size = 12;
  FeatureTables tables(store, "enc", space, rng);

  std::vector<const RankingSample*> rows;
  for (const auto& r : out.ranking) rows.push_back(&r);
  Tape tb;
  const Tensor& batch = tb.value(encode_bundle_batch(tb, store, tables, space, rows, statics));
  REQUIRE(batch.rows() == 24);
  REQUIRE(batch.cols() == 58);

  // Rebuild each row through the single-bundle path via a replayed state.
  SessionState st(log.session_id, log.user_id, log.scene, log.week, log.hour, 12);
  size_t next = 0;
  std::map<int32_t, const PageRecord*> pages;
  for (const auto& p : log.pages) pages[p.page_index] = &p;
  for (const auto& ev : log.events) {
    if (ev.kind == EventKind::expose) {
      const FeatureBundle b = st.bundle_for(ev.item_id);
      Tape ts;
      const Tensor& single = ts.value(encode_bundle(ts, store, tables, space, b));
      CHECK(std::memcmp(single.data(), batch.data() + next * 58, sizeof(double) * 58) == 0);
      ++next;
    }
    if (ev.kind == EventKind::page_request) {
      st.on_event(ev);
      st.on_page(*pages.at(ev.page_index));
      continue;
    }
    st.on_event(ev);
  }
  CHECK(next == 24);
}

TEST_CASE("gradients flow through the bundle encoding") {
  const SessionLog log = two_page_log();
  const StaticsTable statics = statics_from_log(log);
  const EmittedSamples out = emit_training_logs(log, EmitConfig{});
  std::vector<const RankingSample*> rows;
  for (size_t i = 12; i < 18; ++i) rows.push_back(&out.ranking[i]);  // rows with clicks

  Rng rng(derive_seed(13, "bundle-grad"));
  ParameterStore store;
  FeatureSpace space;
  space.n_items = 400;
  space.n_categories = 5;
  space.page_size = 12;
  space.emb_dim = 3;
  FeatureTables tables(store, "enc", space, rng);

  auto fn = [&](Tape& t, ParameterStore& s) {
    Value x = encode_bundle_batch(t, s, tables, space, rows, statics);
    return t.mean_all(t.mul(x, x));
  };
  auto res = testutil::gradcheck(store, fn);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("csv exports are well-formed") {
  const SessionLog log = two_page_log();
  const StaticsTable statics = statics_from_log(log);
  const EmittedSamples out = emit_training_logs(log, EmitConfig{});

  const std::string rp = tmp_path("edgesim_rank.csv");
  write_ranking_samples_csv(rp, out.ranking, statics, 5);
  const std::string rcsv = slurp(rp);
  CHECK(rcsv.rfind("session,user,scene,", 0) == 0);
  CHECK(std::count(rcsv.begin(), rcsv.end(), '\n') == 6);

  const std::string sp = tmp_path("edgesim_supply.csv");
  write_supply_samples_csv(sp, out.supply, 100);
  const std::string scsv = slurp(sp);
  CHECK(std::count(scsv.begin(), scsv.end(), '\n') == 7);

  std::remove(rp.c_str());
  std::remove(sp.c_str());
}

TEST_CASE("stay time normalization") {
  CHECK(stay_norm(0.0) == 0.0);
  CHECK(stay_norm(300.0) == 1.0);
  CHECK(stay_norm(1000.0) == 1.0);  // capped
  CHECK(stay_norm(12.0) == doctest::Approx(std::log1p(12.0) / std::log1p(300.0)));
  CHECK(click_count_norm(3) == doctest::Approx(0.3));
  CHECK(purchase_count_norm(7) == 1.0);
}
