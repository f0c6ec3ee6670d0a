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
#include <vector>

#include "edgesim/features.hpp"
#include "edgesim/graph.hpp"
#include "edgesim/layers.hpp"

namespace edgesim {

// Supply-side estimator. Decides, at each browse checkpoint, whether the
// rest of the current page is still worth anything to the user:
//
//   RIE : real-time interest: masked GRU over the click sequence
//          (mean-pooled) next to an MLP over device realtime features.
//   CIE : context: GRU + mean pooling over the current page in rank order.
//   UM  : two-task MMoE over [rie | cie] whose gates see only the P_cv
//          position embedding; task heads emit pre-activations (s_l, s_u).
//
// Heads are reparameterized so the uplift can never go negative:
//   special objective:  v_l = sigmoid(s_l), v_g = sigmoid(s_l + softplus(s_u))
//   general objective:  v_l = softplus(s_l), v_g = v_l + softplus(s_u)
// In both, u_p = v_g - v_l >= 0 holds for every input and parameter value.

struct SupplyDims {
  int64_t click_hidden = 16;
  int64_t cie_hidden = 16;
  int64_t rt_hidden = 16;
  int64_t n_experts = 2;
  std::vector<int64_t> expert_dims = {32, 16};
  std::vector<int64_t> tower_dims = {16, 1};  // appended after the expert output
};

struct SupplyConfig {
  double alpha = 0.05;
  SupplyObjective objective = SupplyObjective::special;
  int checkpoint_stride = kDefaultCheckpointStride;
  int max_auto_pages = 3;
};

struct UpliftEstimate {
  double v_l = 0.0;
  double v_g = 0.0;
  double u_p = 0.0;
};

// Branch-zeroing switches. A zeroed branch is replaced by a constant zero
// block, so its parameters drop out of the graph entirely (exact zero
// gradients) both at training and at inference.
struct SupplyAblation {
  bool zero_rie = false;
  bool zero_cie = false;
};

class SupplyModel {
 public:
  SupplyModel(const FeatureSpace& space, const SupplyDims& dims, uint64_t seed);

  struct Forward {
    Value s_l;  // [B,1] pre-activations
    Value s_u;
    Value v_l;  // [B,1] heads after reparameterization
    Value v_g;
    Value u_p;
    std::vector<Value> gates;  // per task [B, n_experts]
  };

  // Sub-encoders, exposed for tests and ablation probes.
  Value rie_forward(Tape& t, const std::vector<const SupplySample*>& rows) const;
  Value cie_forward(Tape& t, const std::vector<const SupplySample*>& rows,
                    const StaticsTable& statics) const;
  Forward um_forward(Tape& t, Value x, const std::vector<int32_t>& p_cv,
                     SupplyObjective objective) const;

  Forward forward(Tape& t, const std::vector<const SupplySample*>& rows,
                  const StaticsTable& statics, SupplyObjective objective,
                  const SupplyAblation& ablation = {}) const;

  // L = L_l + L_g; BCE under the special objective (labels must be 0/1),
  // MSE under the general one.
  Value loss(Tape& t, const Forward& f, const std::vector<const SupplySample*>& rows,
             SupplyObjective objective) const;

  UpliftEstimate estimate(const SupplySample& context, const StaticsTable& statics,
                          SupplyObjective objective, const SupplyAblation& ablation = {}) const;
  std::vector<UpliftEstimate> predict(const std::vector<const SupplySample*>& rows,
                                      const StaticsTable& statics, SupplyObjective objective,
                                      const SupplyAblation& ablation = {}) const;

  int64_t param_count() const;
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const FeatureSpace& space() const { return space_; }
  int64_t rie_out_dim() const { return dims_.click_hidden + dims_.rt_hidden; }

 private:
  FeatureSpace space_;
  SupplyDims dims_;
  ParameterStore store_;
  std::unique_ptr<FeatureTables> tables_;
  std::unique_ptr<Gru> click_gru_;
  std::unique_ptr<Gru> cie_gru_;
  std::unique_ptr<Mlp> rt_mlp_;
  std::unique_ptr<Mmoe> um_;
};

// True iff the estimated uplift of the remaining list falls below alpha and
// the session's auto-page budget is not exhausted.
bool should_page(const UpliftEstimate& estimate, const SupplyConfig& config, int auto_pages_used);

}  // namespace edgesim
