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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "edgesim/features.hpp"
#include "edgesim/graph.hpp"
#include "edgesim/layers.hpp"

namespace edgesim {

// Device-side ranking. Two rankers share the ScoredItem/rank_page contract:
//
//   DmrModel      : click GRU + target attention, target MLP, realtime MLP,
//                    scene-gated MMoE with CTR and CVR towers, CTCVR as the
//                    in-graph product (so p_ctcvr <= min(p_ctr, p_cvr) holds
//                    exactly and the conversion tower trains on the full
//                    exposure space).
//   BaselineRanker: pooled click GRU + flat feature MLP with a single CTR
//                    head; its conversion columns mirror the CTR estimate.

struct ScoredItem {
  int32_t item_id = -1;
  double p_ctr = 0.0;
  double p_cvr = 0.0;
  double p_ctcvr = 0.0;  // always p_ctr * p_cvr of the same forward pass
  double rank_value = 0.0;
};

// rank_value = p_ctr^a * p_ctcvr^b. The default orders by conversion value
// alone; (1, 0) reproduces pure CTR ranking.
struct RankBlend {
  double a = 0.0;
  double b = 1.0;
};

// Descending rank_value, ties by p_ctr descending, then item id ascending.
// Returns the reordered item ids (a permutation of the input ids).
std::vector<int32_t> rank_page(const std::vector<ScoredItem>& scored);

struct DmrDims {
  int64_t click_hidden = 16;
  int64_t attn_dim = 16;
  int64_t target_hidden = 32;
  int64_t rt_hidden = 16;
  int64_t n_shared_experts = 2;
  std::vector<int64_t> expert_dims = {32, 16};
  std::vector<int64_t> tower_dims = {16, 1};
};

class DmrModel {
 public:
  DmrModel(const FeatureSpace& space, const DmrDims& dims, uint64_t seed);

  struct Forward {
    Value p_ctr;    // [B,1] in (0,1)
    Value p_cvr;    // [B,1] in (0,1)
    Value p_ctcvr;  // [B,1] product node
    Value attn;     // [B, attn_dim]; exact zeros on empty-click rows
    std::vector<Value> gates;
  };

  // All rows must carry `scene`; batches are scene-pure by construction.
  Forward forward(Tape& t, const std::vector<const RankingSample*>& rows,
                  const StaticsTable& statics, Scene scene) const;

  // bce(p_ctr, click) + bce(p_ctcvr, ctcvr). Conversion gradients reach the
  // CVR tower only through the product, scaled by p_ctr.
  Value loss(Tape& t, const Forward& f, const std::vector<const RankingSample*>& rows) const;

  std::vector<ScoredItem> score_items(const std::vector<RankingSample>& rows,
                                      const StaticsTable& statics,
                                      const RankBlend& blend = {}) const;

  int64_t param_count() const;
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const FeatureSpace& space() const { return space_; }

 private:
  FeatureSpace space_;
  DmrDims dims_;
  ParameterStore store_;
  std::unique_ptr<FeatureTables> tables_;
  std::unique_ptr<Gru> click_gru_;
  std::unique_ptr<TargetAttention> attn_;
  std::unique_ptr<Mlp> target_mlp_;
  std::unique_ptr<Mlp> rt_mlp_;
  std::unique_ptr<Smmoe> smmoe_;
};

struct BaselineDims {
  int64_t click_hidden = 8;
  std::vector<int64_t> head_dims = {24, 1};
};

class BaselineRanker {
 public:
  BaselineRanker(const FeatureSpace& space, const BaselineDims& dims, uint64_t seed);

  // [B,1] click probability.
  Value forward(Tape& t, const std::vector<const RankingSample*>& rows,
                const StaticsTable& statics) const;
  Value loss(Tape& t, Value p_ctr, const std::vector<const RankingSample*>& rows) const;

  // p_cvr and p_ctcvr columns repeat the CTR estimate (p_cvr = p_ctr,
  // p_ctcvr = p_ctr^2), which preserves the ScoredItem product invariant and
  // ranks identically to raw CTR under the default blend.
  std::vector<ScoredItem> score_items(const std::vector<RankingSample>& rows,
                                      const StaticsTable& statics,
                                      const RankBlend& blend = {}) const;

  int64_t param_count() const;
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

 private:
  FeatureSpace space_;
  BaselineDims dims_;
  ParameterStore store_;
  std::unique_ptr<FeatureTables> tables_;
  std::unique_ptr<Gru> click_gru_;
  std::unique_ptr<Mlp> head_;
};

// Score dump CSV (one line per scored item at a checkpoint).
std::string score_dump_header();
std::string score_dump_line(int64_t session_id, const ScoredItem& item, Scene scene, int rank);

}  // namespace edgesim
