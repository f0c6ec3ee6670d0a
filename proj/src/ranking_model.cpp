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
#include "edgesim/ranking_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "edgesim/error.hpp"
#include "edgesim/rng.hpp"

namespace edgesim {

namespace {

constexpr int64_t kClickStepDim = 1;
constexpr int64_t kRealtimeDenseDim = 2;

void require_scene(const std::vector<const RankingSample*>& rows, Scene scene) {
  for (const auto* r : rows) {
    if (r->scene != scene) {
      fail("bad_argument", "ranking batch mixes scenes; batches must be scene-pure");
    }
  }
}

Tensor label_column(const std::vector<const RankingSample*>& rows, bool conversion) {
  Tensor y(static_cast<int64_t>(rows.size()), 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    y[static_cast<int64_t>(i)] = static_cast<double>(conversion ? rows[i]->ctcvr : rows[i]->click);
  }
  return y;
}

void validate_labels(const std::vector<const RankingSample*>& rows) {
  for (const auto* r : rows) {
    if ((r->click != 0 && r->click != 1) || (r->ctcvr != 0 && r->ctcvr != 1)) {
      fail("bad_label", "ranking labels must be binary");
    }
    if (r->ctcvr > r->click) {
      fail("bad_label", "ctcvr label exceeds click label (conversion without click)");
    }
  }
}

// Shared pieces of both rankers' encode paths.
struct ClickStates {
  std::vector<Value> states;
  std::vector<Value> mask_values;
  ClickSeqBatch cs;
};

ClickStates run_click_gru(Tape& t, ParameterStore& store, const FeatureTables& tables,
                          const Gru& gru, const std::vector<const RankingSample*>& rows) {
  ClickStates out;
  std::vector<const std::vector<ClickEntry>*> seqs;
  seqs.reserve(rows.size());
  for (const auto* r : rows) seqs.push_back(&r->seq);
  out.cs = build_click_seq(seqs);
  if (!out.cs.any) return out;

  const int64_t batch = static_cast<int64_t>(rows.size());
  Value h = gru.zero_state(t, batch);
  for (int64_t s = 0; s < out.cs.steps; ++s) {
    Value x = t.concat_cols({tables.item.lookup(t, store, out.cs.item_rows[s]),
                             tables.category.lookup(t, store, out.cs.cate_rows[s]),
                             t.input(out.cs.dense[s])});
    Value h_new = gru.step(t, store, x, h);
    h = t.add(h, t.mul_colvec(t.sub(h_new, h), t.input(out.cs.mask[s])));
    out.states.push_back(h);
    out.mask_values.push_back(t.input(out.cs.mask[s]));
  }
  return out;
}

Value encode_target(Tape& t, ParameterStore& store, const FeatureTables& tables,
                    const TargetBatch& tb) {
  return t.concat_cols({tables.item.lookup(t, store, tb.item_rows),
                        tables.category.lookup(t, store, tb.cate_rows), t.input(tb.dense)});
}

Value encode_realtime(Tape& t, ParameterStore& store, const FeatureTables& tables,
                      const RealtimeBatch& rb) {
  return t.concat_cols({tables.position.lookup(t, store, rb.pos_rows),
                        tables.week.lookup(t, store, rb.week_rows),
                        tables.hour.lookup(t, store, rb.hour_rows), t.input(rb.dense)});
}

double blend_value(const RankBlend& blend, double p_ctr, double p_ctcvr) {
  return std::pow(p_ctr, blend.a) * std::pow(p_ctcvr, blend.b);
}

}  // namespace

std::vector<int32_t> rank_page(const std::vector<ScoredItem>& scored) {
  std::vector<ScoredItem> order = scored;
  std::sort(order.begin(), order.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.rank_value != b.rank_value) return a.rank_value > b.rank_value;
    if (a.p_ctr != b.p_ctr) return a.p_ctr > b.p_ctr;
    return a.item_id < b.item_id;
  });
  std::vector<int32_t> ids;
  ids.reserve(order.size());
  for (const auto& s : order) ids.push_back(s.item_id);
  return ids;
}

DmrModel::DmrModel(const FeatureSpace& space, const DmrDims& dims, uint64_t seed)
    : space_(space), dims_(dims) {
  if (space.n_items <= 0 || space.n_categories <= 0 || space.page_size <= 0 ||
      space.emb_dim <= 0) {
    fail("bad_config", "dmr model: feature space dims must be positive");
  }
  Rng rng(derive_seed(seed, "dmr-init"));
  tables_ = std::make_unique<FeatureTables>(store_, "mr", space, rng);
  const int64_t e = space.emb_dim;
  const int64_t target_width = 2 * e + kStatsDim + 2;
  click_gru_ = std::make_unique<Gru>(store_, "mr.click_gru", 2 * e + kClickStepDim,
                                     dims.click_hidden, rng);
  attn_ = std::make_unique<TargetAttention>(store_, "mr.attn", target_width, dims.click_hidden,
                                            dims.attn_dim, rng);
  target_mlp_ = std::make_unique<Mlp>(store_, "mr.target",
                                      std::vector<int64_t>{target_width, dims.target_hidden},
                                      Mlp::Out::relu, rng);
  rt_mlp_ = std::make_unique<Mlp>(store_, "mr.rt",
                                  std::vector<int64_t>{3 * e + kRealtimeDenseDim, dims.rt_hidden},
                                  Mlp::Out::relu, rng);
  const int64_t fused = dims.attn_dim + dims.target_hidden + dims.rt_hidden;
  std::vector<Mmoe::TaskSpec> tasks(2, Mmoe::TaskSpec{dims.tower_dims, Mlp::Out::sigmoid});
  smmoe_ = std::make_unique<Smmoe>(store_, "mr.sm", fused, fused, dims.n_shared_experts,
                                   dims.expert_dims, tasks, rng);
}

DmrModel::Forward DmrModel::forward(Tape& t, const std::vector<const RankingSample*>& rows,
                                    const StaticsTable& statics, Scene scene) const {
  if (rows.empty()) fail("bad_argument", "dmr forward: empty batch");
  require_scene(rows, scene);
  const int64_t batch = static_cast<int64_t>(rows.size());
  auto& store = const_cast<ParameterStore&>(store_);

  std::vector<ItemRef> targets;
  targets.reserve(rows.size());
  for (const auto* r : rows) targets.push_back(r->target);
  TargetBatch tb = build_target_batch(targets, statics);
  Value target_enc = encode_target(t, store, *tables_, tb);

  ClickStates ck = run_click_gru(t, store, *tables_, *click_gru_, rows);
  Value attn;
  if (ck.cs.any) {
    auto att = attn_->forward(t, store, target_enc, ck.states, &ck.mask_values);
    // Rows with no clicks carry no information; pin them to exact +0.
    attn = t.add(t.mul_colvec(att.out, t.input(ck.cs.nonempty)),
                 t.input(Tensor::zeros(batch, dims_.attn_dim)));
  } else {
    attn = t.input(Tensor::zeros(batch, dims_.attn_dim));
  }

  Value tgt = target_mlp_->forward(t, store, target_enc);
  Value rt = rt_mlp_->forward(t, store, encode_realtime(t, store, *tables_,
                                                        build_realtime_batch(rows)));
  Value x = t.concat_cols({attn, tgt, rt});
  Smmoe::Result r = smmoe_->forward(t, store, x, x, scene);

  Forward f;
  f.p_ctr = r.tasks[0];
  f.p_cvr = r.tasks[1];
  f.p_ctcvr = t.mul(f.p_ctr, f.p_cvr);
  f.attn = attn;
  f.gates = std::move(r.gates);
  return f;
}

Value DmrModel::loss(Tape& t, const Forward& f,
                     const std::vector<const RankingSample*>& rows) const {
  if (rows.empty()) fail("bad_argument", "dmr loss: empty batch");
  validate_labels(rows);
  return t.add(bce_loss(t, f.p_ctr, label_column(rows, false)),
               bce_loss(t, f.p_ctcvr, label_column(rows, true)));
}

std::vector<ScoredItem> DmrModel::score_items(const std::vector<RankingSample>& rows,
                                              const StaticsTable& statics,
                                              const RankBlend& blend) const {
  if (rows.empty()) return {};
  const Scene scene = rows.front().scene;
  constexpr size_t kChunk = 512;
  std::vector<ScoredItem> out;
  out.reserve(rows.size());
  for (size_t start = 0; start < rows.size(); start += kChunk) {
    const size_t stop = std::min(rows.size(), start + kChunk);
    std::vector<const RankingSample*> chunk;
    for (size_t i = start; i < stop; ++i) chunk.push_back(&rows[i]);
    Tape t;
    Forward f = forward(t, chunk, statics, scene);
    const Tensor& ctr = t.value(f.p_ctr);
    const Tensor& cvr = t.value(f.p_cvr);
    const Tensor& ctcvr = t.value(f.p_ctcvr);
    for (int64_t i = 0; i < ctr.rows(); ++i) {
      ScoredItem s;
      s.item_id = rows[start + static_cast<size_t>(i)].target.item_id;
      s.p_ctr = ctr[i];
      s.p_cvr = cvr[i];
      s.p_ctcvr = ctcvr[i];
      s.rank_value = blend_value(blend, s.p_ctr, s.p_ctcvr);
      out.push_back(s);
    }
  }
  return out;
}

int64_t DmrModel::param_count() const {
  return tables_->param_count() + click_gru_->param_count() + attn_->param_count() +
         target_mlp_->param_count() + rt_mlp_->param_count() + smmoe_->param_count();
}

BaselineRanker::BaselineRanker(const FeatureSpace& space, const BaselineDims& dims, uint64_t seed)
    : space_(space), dims_(dims) {
  if (space.n_items <= 0 || space.n_categories <= 0 || space.page_size <= 0 ||
      space.emb_dim <= 0) {
    fail("bad_config", "baseline ranker: feature space dims must be positive");
  }
  Rng rng(derive_seed(seed, "baseline-init"));
  tables_ = std::make_unique<FeatureTables>(store_, "bl", space, rng);
  const int64_t e = space.emb_dim;
  click_gru_ = std::make_unique<Gru>(store_, "bl.click_gru", 2 * e + kClickStepDim,
                                     dims.click_hidden, rng);
  const int64_t in = dims.click_hidden + (2 * e + kStatsDim + 2) + (3 * e + kRealtimeDenseDim);
  std::vector<int64_t> head_dims;
  head_dims.push_back(in);
  head_dims.insert(head_dims.end(), dims.head_dims.begin(), dims.head_dims.end());
  head_ = std::make_unique<Mlp>(store_, "bl.head", head_dims, Mlp::Out::sigmoid, rng);
}

Value BaselineRanker::forward(Tape& t, const std::vector<const RankingSample*>& rows,
                              const StaticsTable& statics) const {
  if (rows.empty()) fail("bad_argument", "baseline forward: empty batch");
  const int64_t batch = static_cast<int64_t>(rows.size());
  auto& store = const_cast<ParameterStore&>(store_);

  ClickStates ck = run_click_gru(t, store, *tables_, *click_gru_, rows);
  Value pooled = ck.cs.any ? masked_mean_rows(t, ck.states, ck.cs.mask, ck.cs.inv_len)
                           : t.input(Tensor::zeros(batch, dims_.click_hidden));

  std::vector<ItemRef> targets;
  targets.reserve(rows.size());
  for (const auto* r : rows) targets.push_back(r->target);
  Value target_enc = encode_target(t, store, *tables_, build_target_batch(targets, statics));
  Value rt_enc = encode_realtime(t, store, *tables_, build_realtime_batch(rows));
  return head_->forward(t, store, t.concat_cols({pooled, target_enc, rt_enc}));
}

Value BaselineRanker::loss(Tape& t, Value p_ctr,
                           const std::vector<const RankingSample*>& rows) const {
  if (rows.empty()) fail("bad_argument", "baseline loss: empty batch");
  validate_labels(rows);
  return bce_loss(t, p_ctr, label_column(rows, false));
}

std::vector<ScoredItem> BaselineRanker::score_items(const std::vector<RankingSample>& rows,
                                                    const StaticsTable& statics,
                                                    const RankBlend& blend) const {
  if (rows.empty()) return {};
  constexpr size_t kChunk = 512;
  std::vector<ScoredItem> out;
  out.reserve(rows.size());
  for (size_t start = 0; start < rows.size(); start += kChunk) {
    const size_t stop = std::min(rows.size(), start + kChunk);
    std::vector<const RankingSample*> chunk;
    for (size_t i = start; i < stop; ++i) chunk.push_back(&rows[i]);
    Tape t;
    const Tensor& p = t.value(forward(t, chunk, statics));
    for (int64_t i = 0; i < p.rows(); ++i) {
      ScoredItem s;
      s.item_id = rows[start + static_cast<size_t>(i)].target.item_id;
      s.p_ctr = p[i];
      s.p_cvr = p[i];
      s.p_ctcvr = p[i] * p[i];
      s.rank_value = blend_value(blend, s.p_ctr, s.p_ctcvr);
      out.push_back(s);
    }
  }
  return out;
}

int64_t BaselineRanker::param_count() const {
  return tables_->param_count() + click_gru_->param_count() + head_->param_count();
}

std::string score_dump_header() {
  return "session_id,item_id,scene,p_ctr,p_cvr,p_ctcvr,rank";
}

std::string score_dump_line(int64_t session_id, const ScoredItem& item, Scene scene, int rank) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%d,%s,%.17g,%.17g,%.17g,%d",
                static_cast<long long>(session_id), item.item_id, scene_name(scene), item.p_ctr,
                item.p_cvr, item.p_ctcvr, rank);
  return buf;
}

}  // namespace edgesim
