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
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "edgesim/layers.hpp"
#include "edgesim/tensor.hpp"

namespace edgesim {

// ---------------------------------------------------------------------------
// Domain records.
//
// Feature sources, mirroring what an edge client actually has in hand:
//   item side  : item id, category id, stats vector v_info
//   server side: calibrated scores p_ctr / p_cvr attached to the page
//   device side: click sequence with stay times, feedback counters v_f,
//                 wall-clock bucket v_t (day-of-week, hour), viewed position
// ---------------------------------------------------------------------------

inline constexpr int kStatsDim = 4;
inline constexpr int kDefaultClickSeqCap = 10;
inline constexpr int kDefaultCheckpointStride = 4;  // screen height, in items
inline constexpr double kStayCapSeconds = 300.0;
inline constexpr int kClicksOnPageCap = 10;
inline constexpr int kPurchasesCap = 5;

struct ItemFeatures {
  int32_t item_id = -1;
  int32_t category_id = -1;
  // Stats proxies in [0,1]: turnover, rating, price band, recency.
  std::array<double, kStatsDim> v_info{};
  double p_ctr = 0.0;
  double p_cvr = 0.0;
};

// Throws unless scores sit in [0,1] and the stats vector is finite.
void validate_item(const ItemFeatures& it);

// Per-item static side info, indexed by item id. Slim sample records store
// item ids only; encoders resolve category/stats through this table.
struct ItemStatics {
  int32_t category_id = -1;
  std::array<double, kStatsDim> v_info{};
};
using StaticsTable = std::vector<ItemStatics>;

enum class EventKind : int { expose = 0, click = 1, purchase = 2, page_request = 3, exit = 4 };
enum class Trigger : int { manual = 0, auto_page = 1 };

const char* event_kind_name(EventKind k);
const char* trigger_name(Trigger t);
EventKind event_kind_from_name(const std::string& s);
Trigger trigger_from_name(const std::string& s);

struct RealTimeEvent {
  EventKind kind = EventKind::expose;
  double t_offset = 0.0;  // seconds since session start
  int32_t item_id = -1;   // expose / click / purchase
  int32_t page_index = -1;
  int32_t position = -1;      // expose: slot within its page
  double stay_seconds = 0.0;  // click
  Trigger trigger = Trigger::manual;  // page_request
};

struct PageRecord {
  int32_t page_index = 0;
  std::vector<ItemFeatures> items;  // server order
};

struct SessionLog {
  int64_t session_id = 0;
  int64_t user_id = 0;
  Scene scene = Scene::android;
  int32_t week = 0;  // day-of-week, 0..6
  int32_t hour = 0;  // 0..23
  double start_minutes = 0.0;  // offset into the simulated horizon
  std::vector<PageRecord> pages;
  std::vector<RealTimeEvent> events;
};

struct ClickEntry {
  int32_t item_id = -1;
  int32_t category_id = -1;
  double stay_seconds = 0.0;
};

// Snapshot of everything the device knows when scoring one target item.
struct FeatureBundle {
  int64_t session_id = 0;
  int64_t user_id = 0;
  Scene scene = Scene::android;
  int32_t week = 0;
  int32_t hour = 0;
  ItemFeatures target;
  int32_t target_position = 0;  // target's slot within its own page
  std::vector<ClickEntry> clicks;  // oldest -> newest, length <= cap
  int32_t p_cv = 0;                // slot of the most recently viewed item
  int32_t page_size = 0;
  int32_t clicks_on_page = 0;          // clicks since the last page fetch
  int32_t purchases_in_session = 0;
};

// Slim stored form of an item on a page: statics live in StaticsTable.
struct ItemRef {
  int32_t item_id = -1;
  double p_ctr = 0.0;
  double p_cvr = 0.0;
};

struct RankingSample {
  int64_t session_id = 0;
  int64_t user_id = 0;
  Scene scene = Scene::android;
  int32_t week = 0;
  int32_t hour = 0;
  int32_t position = 0;  // slot the exposure landed on
  int32_t clicks_on_page = 0;
  int32_t purchases_in_session = 0;
  int32_t click = 0;  // labels
  int32_t ctcvr = 0;
  ItemRef target;
  std::vector<ClickEntry> seq;
};

struct SupplySample {
  int64_t session_id = 0;
  int64_t user_id = 0;
  Scene scene = Scene::android;
  int32_t week = 0;
  int32_t hour = 0;
  int32_t page_index = 0;
  int32_t p_cv = 0;    // slot of the most recently viewed item
  int32_t window = 0;  // exposed prefix length at the checkpoint
  int32_t clicks_on_page = 0;
  int32_t purchases_in_session = 0;
  int32_t v_l = 0;  // labels
  int32_t v_g = 0;
  std::vector<ItemRef> page;  // full page, server order
  std::vector<ClickEntry> seq;
};

enum class SupplyObjective : int { special = 0, general = 1 };
const char* supply_objective_name(SupplyObjective o);
SupplyObjective supply_objective_from_name(const std::string& s);

// ---------------------------------------------------------------------------
// Session state. One instance tracks one session, fed pages and events in
// order. The live engine and the log replay both run through this class, so
// serving-time bundles and training-time samples see identical context.
// ---------------------------------------------------------------------------
class SessionState {
 public:
  SessionState(int64_t session_id, int64_t user_id, Scene scene, int32_t week, int32_t hour,
               int32_t page_size, int click_cap = kDefaultClickSeqCap);

  void on_page(const PageRecord& page);
  void on_event(const RealTimeEvent& ev);

  // Assembles the feature snapshot for one candidate. The target must have
  // been fetched and not yet exposed.
  FeatureBundle bundle_for(int32_t item_id) const;

  int32_t p_cv() const { return p_cv_; }
  int32_t clicks_on_page() const { return clicks_on_page_; }
  int32_t purchases_in_session() const { return purchases_; }
  int64_t exposures() const { return exposures_; }
  int32_t exposures_on_page(int32_t page_index) const;
  int32_t current_page() const { return current_page_; }
  int32_t last_fetched_page() const { return last_fetched_page_; }
  bool fetched(int32_t item_id) const;
  bool exposed(int32_t item_id) const;
  const ItemFeatures* find_item(int32_t item_id) const;
  int32_t page_of(int32_t item_id) const;
  int32_t slot_of(int32_t item_id) const;
  std::vector<ItemRef> page_refs(int32_t page_index) const;  // server order
  std::vector<ClickEntry> click_seq() const;
  int32_t page_size() const { return page_size_; }
  Scene scene() const { return scene_; }
  int64_t session_id() const { return session_id_; }
  int64_t user_id() const { return user_id_; }
  int32_t week() const { return week_; }
  int32_t hour() const { return hour_; }

 private:
  struct Placed {
    ItemFeatures item;
    int32_t page_index = 0;
    int32_t slot = 0;
    bool exposed = false;
    bool clicked = false;
  };

  int64_t session_id_;
  int64_t user_id_;
  Scene scene_;
  int32_t week_;
  int32_t hour_;
  int32_t page_size_;
  int click_cap_;

  std::map<int32_t, Placed> items_;
  std::map<int32_t, int32_t> exposures_per_page_;
  std::deque<ClickEntry> clicks_;
  int32_t p_cv_ = 0;
  int32_t current_page_ = 0;       // page of the most recently exposed item
  int32_t last_fetched_page_ = -1;
  int32_t clicks_on_page_ = 0;
  int32_t purchases_ = 0;
  int64_t exposures_ = 0;
  bool exited_ = false;
};

// Builds the unlabeled supply-side context at a checkpoint: the page of the
// most recently viewed item plus the device snapshot. Labels are filled by
// the caller (replay) or ignored (live trigger decision).
SupplySample supply_context(const SessionState& st);

RankingSample to_ranking_sample(const FeatureBundle& b);

// ---------------------------------------------------------------------------
// Labels and emission.
// ---------------------------------------------------------------------------

struct SupplyLabels {
  int32_t v_l = 0;
  int32_t v_g = 0;
};

// orders_by_slot[j] != 0 marks an order on page slot j (any time during the
// session). window = exposed prefix length at the checkpoint.
SupplyLabels make_supply_labels(const std::vector<uint8_t>& orders_by_slot, int32_t window,
                                SupplyObjective objective);

struct EmitConfig {
  SupplyObjective objective = SupplyObjective::special;
  int click_cap = kDefaultClickSeqCap;
  int checkpoint_stride = kDefaultCheckpointStride;
};

struct EmittedSamples {
  std::vector<SupplySample> supply;
  std::vector<RankingSample> ranking;
};

// Replays a completed session log into training samples: one RankingSample
// per exposure, one SupplySample per checkpoint (every `checkpoint_stride`
// exposures within a page). Requires logs whose exposures walk each page as
// an in-order prefix (the logging policy serves pages in server order).
EmittedSamples emit_training_logs(const SessionLog& log, const EmitConfig& cfg);
void emit_training_logs(const SessionLog& log, const EmitConfig& cfg,
                        std::vector<SupplySample>* supply, std::vector<RankingSample>* ranking);

// ---------------------------------------------------------------------------
// Encoding. Scalar transforms first, then batched builders that model code
// feeds to embedding lookups.
// ---------------------------------------------------------------------------

double stay_norm(double seconds);           // log1p, min-max scaled to [0,1]
double click_count_norm(int n);             // n / 10, capped at 1
double purchase_count_norm(int n);          // n / 5, capped at 1

// Vocabulary sizes shared by every model's embedding tables.
struct FeatureSpace {
  int64_t n_items = 0;
  int64_t n_categories = 0;
  int64_t page_size = 0;
  int64_t emb_dim = 8;

  int64_t item_vocab() const { return n_items + 1; }      // +1: OOV row
  int64_t category_vocab() const { return n_categories + 1; }
  int64_t position_vocab() const { return page_size + 1; }
  int64_t week_vocab() const { return 7; }
  int64_t hour_vocab() const { return 24; }
};

// One set of embedding tables under a common prefix. Each model owns its own.
struct FeatureTables {
  FeatureTables(ParameterStore& store, const std::string& prefix, const FeatureSpace& space,
                Rng& rng);

  EmbeddingTable item;
  EmbeddingTable category;
  EmbeddingTable position;
  EmbeddingTable week;
  EmbeddingTable hour;

  int64_t param_count() const;
};

inline int item_row(int32_t item_id) { return static_cast<int>(item_id) + 1; }
inline int category_row(int32_t category_id) { return static_cast<int>(category_id) + 1; }
inline int position_row(int32_t pos) { return static_cast<int>(pos) + 1; }

const ItemStatics& statics_for(const StaticsTable& statics, int32_t item_id);

// Click sequences, batched time-major with masks. Step tensors are indexed
// oldest -> newest; shorter sequences are left-padded with mask 0 so the
// final GRU state always reflects the newest click.
struct ClickSeqBatch {
  int64_t batch = 0;
  int64_t steps = 0;
  std::vector<std::vector<int>> item_rows;  // [steps][batch], 0 on pads
  std::vector<std::vector<int>> cate_rows;
  std::vector<Tensor> dense;  // [steps] x [batch,1] stay_norm, 0 on pads
  std::vector<Tensor> mask;   // [steps] x [batch,1]
  Tensor inv_len;             // [batch,1], 1/len or 0 for empty sequences
  Tensor nonempty;            // [batch,1], 1 if the sequence has any click
  bool any = false;
};
ClickSeqBatch build_click_seq(const std::vector<const std::vector<ClickEntry>*>& seqs);

// Full pages for the context encoder. All pages must share one length.
struct PageBatch {
  int64_t batch = 0;
  int64_t steps = 0;
  std::vector<std::vector<int>> item_rows;  // [steps][batch]
  std::vector<std::vector<int>> cate_rows;
  std::vector<Tensor> dense;  // [steps] x [batch, 6]: v_info | p_ctr | p_cvr
};
PageBatch build_page_batch(const std::vector<const std::vector<ItemRef>*>& pages,
                           const StaticsTable& statics);

// One target item per row.
struct TargetBatch {
  std::vector<int> item_rows;
  std::vector<int> cate_rows;
  Tensor dense;  // [batch, 6]: v_info | p_ctr | p_cvr
};
TargetBatch build_target_batch(const std::vector<ItemRef>& items, const StaticsTable& statics);

// Device-side realtime context: position + time buckets + feedback counters.
struct RealtimeBatch {
  std::vector<int> pos_rows;
  std::vector<int> week_rows;
  std::vector<int> hour_rows;
  Tensor dense;  // [batch, 2]: clicks_on_page norm | purchases norm
};
RealtimeBatch build_realtime_batch(const std::vector<const RankingSample*>& rows);
RealtimeBatch build_realtime_batch(const std::vector<const SupplySample*>& rows);

// Flat dense encoding of one bundle, the documented canonical layout:
//   [ 0,  8) target item embedding
//   [ 8, 16) target category embedding
//   [16, 20) v_info
//   [20]     p_ctr  (verbatim)
//   [21]     p_cvr  (verbatim)
//   [22, 25) device scalars: position/page_size, clicks norm, purchases norm
//   [25, 33) week embedding
//   [33, 41) hour embedding
//   [41, 58) mean-pooled click steps [item emb | cate emb | stay]; all zero
//            when the click sequence is empty
// Total width: 41 + emb-derived click slot = 58 at the default dim of 8.
inline constexpr int kBundleCtrOffset = 20;
int64_t bundle_encoding_width(const FeatureSpace& space);
Value encode_bundle(Tape& t, ParameterStore& store, const FeatureTables& tables,
                    const FeatureSpace& space, const FeatureBundle& bundle);
Value encode_bundle_batch(Tape& t, ParameterStore& store, const FeatureTables& tables,
                          const FeatureSpace& space, const std::vector<const RankingSample*>& rows,
                          const StaticsTable& statics);

// ---------------------------------------------------------------------------
// File formats. Session logs are newline-delimited JSON objects, one session
// per line. Sample files are a compact versioned text format (one record per
// line); both carry enough to rebuild training batches given the statics
// table. CSV exports are for eyeballing only.
// ---------------------------------------------------------------------------

std::string session_log_to_json_line(const SessionLog& log);
SessionLog session_log_from_json_line(const std::string& line);
void write_session_logs(const std::string& path, const std::vector<SessionLog>& logs);
std::vector<SessionLog> read_session_logs(const std::string& path);

void write_ranking_samples(const std::string& path, const std::vector<RankingSample>& rows);
std::vector<RankingSample> read_ranking_samples(const std::string& path);
void write_supply_samples(const std::string& path, const std::vector<SupplySample>& rows);
std::vector<SupplySample> read_supply_samples(const std::string& path);

void write_ranking_samples_csv(const std::string& path, const std::vector<RankingSample>& rows,
                               const StaticsTable& statics, size_t limit);
void write_supply_samples_csv(const std::string& path, const std::vector<SupplySample>& rows,
                              size_t limit);

}  // namespace edgesim
