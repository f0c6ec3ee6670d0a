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
#include "edgesim/supply_model.hpp"

#include <string>
#include <utility>

#include "edgesim/error.hpp"
#include "edgesim/rng.hpp"

namespace edgesim {

namespace {

constexpr int64_t kClickStepDim = 1;     // stay_norm
constexpr int64_t kRealtimeDenseDim = 2;  // clicks norm | purchases norm

Tensor labels_column(const std::vector<const SupplySample*>& rows, bool global) {
  Tensor y(static_cast<int64_t>(rows.size()), 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    y[static_cast<int64_t>(i)] = static_cast<double>(global ? rows[i]->v_g : rows[i]->v_l);
  }
  return y;
}

}  // namespace

SupplyModel::SupplyModel(const FeatureSpace& space, const SupplyDims& dims, uint64_t seed)
    : space_(space), dims_(dims) {
  if (space.n_items <= 0 || space.n_categories <= 0 || space.page_size <= 0 ||
      space.emb_dim <= 0) {
    fail("bad_config", "supply model: feature space dims must be positive");
  }
  Rng rng(derive_seed(seed, "supply-init"));
  tables_ = std::make_unique<FeatureTables>(store_, "ms", space, rng);
  const int64_t e = space.emb_dim;
  click_gru_ = std::make_unique<Gru>(store_, "ms.click_gru", 2 * e + kClickStepDim,
                                     dims.click_hidden, rng);
  cie_gru_ = std::make_unique<Gru>(store_, "ms.cie_gru", 2 * e + kStatsDim + 2, dims.cie_hidden,
                                   rng);
  rt_mlp_ = std::make_unique<Mlp>(store_, "ms.rt",
                                  std::vector<int64_t>{3 * e + kRealtimeDenseDim, dims.rt_hidden},
                                  Mlp::Out::relu, rng);
  std::vector<Mmoe::TaskSpec> tasks(2, Mmoe::TaskSpec{dims.tower_dims, Mlp::Out::linear});
  um_ = std::make_unique<Mmoe>(store_, "ms.um", rie_out_dim() + dims.cie_hidden, e,
                               dims.n_experts, dims.expert_dims, tasks, rng);
}

Value SupplyModel::rie_forward(Tape& t, const std::vector<const SupplySample*>& rows) const {
  if (rows.empty()) fail("bad_argument", "rie_forward: empty batch");
  const int64_t batch = static_cast<int64_t>(rows.size());
  auto& store = const_cast<ParameterStore&>(store_);

  std::vector<const std::vector<ClickEntry>*> seqs;
  seqs.reserve(rows.size());
  for (const auto* r : rows) seqs.push_back(&r->seq);
  ClickSeqBatch cs = build_click_seq(seqs);

  Value pooled;
  if (cs.any) {
    Value h = click_gru_->zero_state(t, batch);
    std::vector<Value> states;
    states.reserve(static_cast<size_t>(cs.steps));
    for (int64_t s = 0; s < cs.steps; ++s) {
      Value x = t.concat_cols({tables_->item.lookup(t, store, cs.item_rows[s]),
                               tables_->category.lookup(t, store, cs.cate_rows[s]),
                               t.input(cs.dense[s])});
      Value h_new = click_gru_->step(t, store, x, h);
      // Keep padded rows frozen at their previous state.
      h = t.add(h, t.mul_colvec(t.sub(h_new, h), t.input(cs.mask[s])));
      states.push_back(h);
    }
    pooled = masked_mean_rows(t, states, cs.mask, cs.inv_len);
  } else {
    pooled = t.input(Tensor::zeros(batch, dims_.click_hidden));
  }

  RealtimeBatch rb = build_realtime_batch(rows);
  Value rt_in = t.concat_cols({tables_->position.lookup(t, store, rb.pos_rows),
                               tables_->week.lookup(t, store, rb.week_rows),
                               tables_->hour.lookup(t, store, rb.hour_rows), t.input(rb.dense)});
  Value rt = rt_mlp_->forward(t, store, rt_in);
  return t.concat_cols({pooled, rt});
}

Value SupplyModel::cie_forward(Tape& t, const std::vector<const SupplySample*>& rows,
                               const StaticsTable& statics) const {
  if (rows.empty()) fail("bad_argument", "cie_forward: empty batch");
  auto& store = const_cast<ParameterStore&>(store_);

  std::vector<const std::vector<ItemRef>*> pages;
  pages.reserve(rows.size());
  for (const auto* r : rows) {
    if (r->page.empty()) {
      fail("bad_argument", "cie_forward: sample carries an empty page");
    }
    pages.push_back(&r->page);
  }
  PageBatch pb = build_page_batch(pages, statics);

  std::vector<Value> xs;
  xs.reserve(static_cast<size_t>(pb.steps));
  for (int64_t s = 0; s < pb.steps; ++s) {
    xs.push_back(t.concat_cols({tables_->item.lookup(t, store, pb.item_rows[s]),
                                tables_->category.lookup(t, store, pb.cate_rows[s]),
                                t.input(pb.dense[s])}));
  }
  std::vector<Value> states = cie_gru_->encode(t, store, xs);
  Value acc = states[0];
  for (size_t s = 1; s < states.size(); ++s) acc = t.add(acc, states[s]);
  return t.scale(acc, 1.0 / static_cast<double>(states.size()));
}

SupplyModel::Forward SupplyModel::um_forward(Tape& t, Value x, const std::vector<int32_t>& p_cv,
                                             SupplyObjective objective) const {
  if (t.value(x).rows() != static_cast<int64_t>(p_cv.size())) {
    fail("shape_mismatch", "um_forward: batch size disagrees with p_cv count");
  }
  auto& store = const_cast<ParameterStore&>(store_);
  std::vector<int> gate_rows;
  gate_rows.reserve(p_cv.size());
  for (int32_t pos : p_cv) {
    if (pos < 0 || pos >= space_.page_size) {
      fail("bad_argument", "um_forward: p_cv " + std::to_string(pos) +
                                              " outside page of size " +
                                              std::to_string(space_.page_size));
    }
    gate_rows.push_back(position_row(pos));
  }
  Value gate_in = tables_->position.lookup(t, store, gate_rows);
  Mmoe::Result r = um_->forward(t, store, x, gate_in);

  Forward f;
  f.s_l = r.tasks[0];
  f.s_u = r.tasks[1];
  f.gates = std::move(r.gates);
  if (objective == SupplyObjective::special) {
    f.v_l = t.sigmoid(f.s_l);
    f.v_g = t.sigmoid(t.add(f.s_l, t.softplus(f.s_u)));
  } else {
    f.v_l = t.softplus(f.s_l);
    f.v_g = t.add(f.v_l, t.softplus(f.s_u));
  }
  f.u_p = t.sub(f.v_g, f.v_l);
  return f;
}

SupplyModel::Forward SupplyModel::forward(Tape& t, const std::vector<const SupplySample*>& rows,
                                          const StaticsTable& statics, SupplyObjective objective,
                                          const SupplyAblation& ablation) const {
  if (rows.empty()) fail("bad_argument", "supply forward: empty batch");
  const int64_t batch = static_cast<int64_t>(rows.size());
  Value rie = ablation.zero_rie ? t.input(Tensor::zeros(batch, rie_out_dim()))
                                : rie_forward(t, rows);
  Value cie = ablation.zero_cie ? t.input(Tensor::zeros(batch, dims_.cie_hidden))
                                : cie_forward(t, rows, statics);
  Value x = t.concat_cols({rie, cie});
  std::vector<int32_t> p_cv;
  p_cv.reserve(rows.size());
  for (const auto* r : rows) p_cv.push_back(r->p_cv);
  return um_forward(t, x, p_cv, objective);
}

Value SupplyModel::loss(Tape& t, const Forward& f, const std::vector<const SupplySample*>& rows,
                        SupplyObjective objective) const {
  if (rows.empty()) fail("bad_argument", "supply loss: empty batch");
  if (objective == SupplyObjective::special) {
    for (const auto* r : rows) {
      if ((r->v_l != 0 && r->v_l != 1) || (r->v_g != 0 && r->v_g != 1)) {
        fail("bad_label",
             "special objective expects binary labels, got v_l=" +
                       std::to_string(r->v_l) + " v_g=" + std::to_string(r->v_g));
      }
    }
    return t.add(bce_loss(t, f.v_l, labels_column(rows, false)),
                 bce_loss(t, f.v_g, labels_column(rows, true)));
  }
  for (const auto* r : rows) {
    if (r->v_l < 0 || r->v_g < r->v_l) {
      fail("bad_label", "general objective expects counts with v_g >= v_l >= 0");
    }
  }
  return t.add(mse_loss(t, f.v_l, labels_column(rows, false)),
               mse_loss(t, f.v_g, labels_column(rows, true)));
}

UpliftEstimate SupplyModel::estimate(const SupplySample& context, const StaticsTable& statics,
                                     SupplyObjective objective,
                                     const SupplyAblation& ablation) const {
  std::vector<const SupplySample*> rows = {&context};
  Tape t;
  Forward f = forward(t, rows, statics, objective, ablation);
  UpliftEstimate e;
  e.v_l = t.value(f.v_l)[0];
  e.v_g = t.value(f.v_g)[0];
  e.u_p = t.value(f.u_p)[0];
  return e;
}

std::vector<UpliftEstimate> SupplyModel::predict(const std::vector<const SupplySample*>& rows,
                                                 const StaticsTable& statics,
                                                 SupplyObjective objective,
                                                 const SupplyAblation& ablation) const {
  constexpr size_t kChunk = 512;
  std::vector<UpliftEstimate> out;
  out.reserve(rows.size());
  for (size_t start = 0; start < rows.size(); start += kChunk) {
    const size_t stop = std::min(rows.size(), start + kChunk);
    std::vector<const SupplySample*> chunk(rows.begin() + static_cast<ptrdiff_t>(start),
                                           rows.begin() + static_cast<ptrdiff_t>(stop));
    Tape t;
    Forward f = forward(t, chunk, statics, objective, ablation);
    const Tensor& v_l = t.value(f.v_l);
    const Tensor& v_g = t.value(f.v_g);
    const Tensor& u_p = t.value(f.u_p);
    for (int64_t i = 0; i < v_l.rows(); ++i) {
      out.push_back(UpliftEstimate{v_l[i], v_g[i], u_p[i]});
    }
  }
  return out;
}

int64_t SupplyModel::param_count() const {
  return tables_->param_count() + click_gru_->param_count() + cie_gru_->param_count() +
         rt_mlp_->param_count() + um_->param_count();
}

bool should_page(const UpliftEstimate& estimate, const SupplyConfig& config, int auto_pages_used) {
  if (auto_pages_used < 0) {
    fail("bad_argument", "should_page: negative auto-page count");
  }
  return estimate.u_p < config.alpha && auto_pages_used < config.max_auto_pages;
}

}  // namespace edgesim
