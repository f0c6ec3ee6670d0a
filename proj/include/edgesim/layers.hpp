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

#include <string>
#include <vector>

#include "edgesim/graph.hpp"
#include "edgesim/rng.hpp"

namespace edgesim {

// Device scene. Everything scene-conditional in the project keys off this.
enum class Scene : int { android = 0, ios = 1 };

inline const char* scene_name(Scene s) { return s == Scene::android ? "android" : "ios"; }

Scene scene_from_int(int v);  // rejects values outside {0, 1}

// All layers follow the same pattern: the constructor creates named
// parameters in a store (prefix + suffix), forward() replays them onto a
// tape. Layers hold only names and dims, so one layer object can drive many
// tapes.

// Fully connected stack, ReLU between hidden layers, configurable output
// activation. Xavier-uniform weight init, zero biases.
class Mlp {
 public:
  enum class Out { linear, relu, sigmoid, softplus };

  Mlp(ParameterStore& store, std::string prefix, std::vector<int64_t> dims, Out out, Rng& rng);

  // x: [B, dims.front()] -> [B, dims.back()]
  Value forward(Tape& t, ParameterStore& store, Value x) const;

  int64_t param_count() const;
  int64_t in_dim() const { return dims_.front(); }
  int64_t out_dim() const { return dims_.back(); }

 private:
  std::string prefix_;
  std::vector<int64_t> dims_;
  Out out_;
};

// Standard GRU cell:
//   r = sigmoid(x W_r + h U_r + b_r)
//   z = sigmoid(x W_z + h U_z + b_z)
//   n = tanh(x W_n + (r * h) U_n + b_n)
//   h' = (1 - z) * n + z * h
class Gru {
 public:
  Gru(ParameterStore& store, std::string prefix, int64_t in_dim, int64_t hidden_dim, Rng& rng);

  // One recurrence step; x [B, in], h [B, hidden] -> [B, hidden].
  Value step(Tape& t, ParameterStore& store, Value x, Value h) const;

  // Full unroll from h_0 = 0; returns every hidden state. Sequence must be
  // non-empty (callers own the documented empty-sequence path).
  std::vector<Value> encode(Tape& t, ParameterStore& store, const std::vector<Value>& xs) const;

  Value zero_state(Tape& t, int64_t batch) const;

  int64_t param_count() const;
  int64_t hidden_dim() const { return hidden_; }

 private:
  std::string prefix_;
  int64_t in_;
  int64_t hidden_;
};

// Single-head scaled dot-product attention against a target query:
// out = softmax(Q K^T / sqrt(d)) V with Q from the target, K/V from the
// sequence.
class TargetAttention {
 public:
  TargetAttention(ParameterStore& store, std::string prefix, int64_t query_in, int64_t seq_in,
                  int64_t d, Rng& rng);

  struct Result {
    Value out;      // [B, d]
    Value weights;  // [B, T]
  };

  // target [B, query_in]; seq: T tensors [B, seq_in]; mask (optional): T
  // column vectors [B, 1] with 1 = real step, 0 = padding. Masked steps get
  // exactly zero weight. Empty sequences are rejected.
  Result forward(Tape& t, ParameterStore& store, Value target, const std::vector<Value>& seq,
                 const std::vector<Value>* mask = nullptr) const;

  int64_t param_count() const;
  int64_t out_dim() const { return d_; }

 private:
  std::string prefix_;
  int64_t query_in_;
  int64_t seq_in_;
  int64_t d_;
};

// Multi-gate mixture of experts: per task, a softmax gate over the expert
// pool mixes expert outputs, a ReLU is applied at the fusion point, and a
// task tower maps the fused vector to the task output. Expert stacks end in
// ReLU so the fusion activation never changes values (and a one-hot gate
// reproduces the selected expert exactly).
class Mmoe {
 public:
  struct TaskSpec {
    std::vector<int64_t> tower_dims;  // from expert_out to task output
    Mlp::Out head;
  };

  Mmoe(ParameterStore& store, std::string prefix, int64_t in_dim, int64_t gate_in_dim,
       int64_t n_experts, const std::vector<int64_t>& expert_dims,
       const std::vector<TaskSpec>& tasks, Rng& rng);

  struct Result {
    std::vector<Value> tasks;  // per task [B, task_out]
    std::vector<Value> gates;  // per task [B, n_experts]
  };

  // x [B, in]; gate_input [B, gate_in]
  Result forward(Tape& t, ParameterStore& store, Value x, Value gate_input) const;

  int64_t param_count() const;
  int64_t n_experts() const { return static_cast<int64_t>(experts_.size()); }

 private:
  std::string prefix_;
  int64_t gate_in_;
  std::vector<Mlp> experts_;
  std::vector<Mlp> towers_;
  std::vector<Mlp::Out> heads_;
};

// Scene-gated MMoE: shared experts plus one expert per scene. For a given
// batch (single scene by construction) the pool is shared experts + that
// scene's expert; the other scene expert is not touched by forward, so its
// gradient is exactly zero. Gate logits are produced for the full pool and
// the inactive scene column is removed before the softmax.
class Smmoe {
 public:
  Smmoe(ParameterStore& store, std::string prefix, int64_t in_dim, int64_t gate_in_dim,
        int64_t n_shared, const std::vector<int64_t>& expert_dims,
        const std::vector<Mmoe::TaskSpec>& tasks, Rng& rng);

  struct Result {
    std::vector<Value> tasks;
    std::vector<Value> gates;  // per task [B, n_shared + 1]
  };

  Result forward(Tape& t, ParameterStore& store, Value x, Value gate_input, Scene scene) const;

  int64_t param_count() const;

 private:
  std::string prefix_;
  int64_t gate_in_;
  std::vector<Mlp> shared_;
  std::vector<Mlp> scene_experts_;  // [android, ios]
  std::vector<Mlp> towers_;
  std::vector<Mlp::Out> heads_;
};

// Embedding lookup table. Row 0 is the reserved out-of-vocabulary slot; any
// id outside [0, vocab) maps there.
class EmbeddingTable {
 public:
  EmbeddingTable(ParameterStore& store, std::string name, int64_t vocab, int64_t dim, Rng& rng);

  // ids.size() rows of dim columns.
  Value lookup(Tape& t, ParameterStore& store, const std::vector<int>& ids) const;

  int64_t param_count() const { return vocab_ * dim_; }
  int64_t dim() const { return dim_; }
  int64_t vocab() const { return vocab_; }

 private:
  std::string name_;
  int64_t vocab_;
  int64_t dim_;
};

// Mean over unmasked steps: sum_t (steps[t] * mask[t]) * inv_len, where
// mask[t] and inv_len are [B,1] columns and inv_len is 1/count (0 for rows
// with no unmasked step). A final add of +0 scrubs the -0.0 that masking can
// leave in all-masked rows, so fully padded rows come out bit-identical to
// the unbatched empty path.
Value masked_mean_rows(Tape& t, const std::vector<Value>& steps, const std::vector<Tensor>& mask,
                       const Tensor& inv_len);

// Copies checkpoint values into an already constructed model's store.
// Missing names or shape differences are configuration errors.
void apply_checkpoint(ParameterStore& store, const ParameterStore& loaded);

}  // namespace edgesim
