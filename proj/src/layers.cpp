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

#include "edgesim/layers.hpp"

#include <cmath>

namespace edgesim {
namespace {

Tensor xavier(Rng& rng, int64_t fan_in, int64_t fan_out) {
  Tensor w(fan_in, fan_out);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
  return w;
}

Value apply_head(Tape& t, Value v, Mlp::Out out) {
  switch (out) {
    case Mlp::Out::linear: return v;
    case Mlp::Out::relu: return t.relu(v);
    case Mlp::Out::sigmoid: return t.sigmoid(v);
    case Mlp::Out::softplus: return t.softplus(v);
  }
  fail("bad_argument", "unknown output activation");
}

}  // namespace

Scene scene_from_int(int v) {
  if (v == 0) return Scene::android;
  if (v == 1) return Scene::ios;
  fail("bad_argument", "unknown scene id " + std::to_string(v));
}

Mlp::Mlp(ParameterStore& store, std::string prefix, std::vector<int64_t> dims, Out out, Rng& rng)
    : prefix_(std::move(prefix)), dims_(std::move(dims)), out_(out) {
  if (dims_.size() < 2) fail("bad_argument", "mlp '" + prefix_ + "' needs at least two dims");
  for (size_t l = 0; l + 1 < dims_.size(); ++l) {
    store.create(prefix_ + ".W" + std::to_string(l), xavier(rng, dims_[l], dims_[l + 1]));
    store.create(prefix_ + ".b" + std::to_string(l), Tensor::zeros(1, dims_[l + 1]));
  }
}

Value Mlp::forward(Tape& t, ParameterStore& store, Value x) const {
  const Tensor& xt = t.value(x);
  if (xt.cols() != dims_.front()) {
    fail("shape_mismatch", "mlp '" + prefix_ + "': input " + xt.shape_str() + ", expected cols " +
                               std::to_string(dims_.front()));
  }
  Value h = x;
  for (size_t l = 0; l + 1 < dims_.size(); ++l) {
    Value w = t.param(store, prefix_ + ".W" + std::to_string(l));
    Value b = t.param(store, prefix_ + ".b" + std::to_string(l));
    h = t.add_rowvec(t.matmul(h, w), b);
    if (l + 2 < dims_.size()) {
      h = t.relu(h);
    } else {
      h = apply_head(t, h, out_);
    }
  }
  return h;
}

int64_t Mlp::param_count() const {
  int64_t n = 0;
  for (size_t l = 0; l + 1 < dims_.size(); ++l) n += dims_[l] * dims_[l + 1] + dims_[l + 1];
  return n;
}

Gru::Gru(ParameterStore& store, std::string prefix, int64_t in_dim, int64_t hidden_dim, Rng& rng)
    : prefix_(std::move(prefix)), in_(in_dim), hidden_(hidden_dim) {
  for (const char* gate : {"r", "z", "n"}) {
    store.create(prefix_ + ".W" + gate, xavier(rng, in_, hidden_));
    store.create(prefix_ + ".U" + gate, xavier(rng, hidden_, hidden_));
    store.create(prefix_ + ".b" + gate, Tensor::zeros(1, hidden_));
  }
}

Value Gru::zero_state(Tape& t, int64_t batch) const {
  return t.input(Tensor::zeros(batch, hidden_));
}

Value Gru::step(Tape& t, ParameterStore& store, Value x, Value h) const {
  const Tensor& xt = t.value(x);
  if (xt.cols() != in_) {
    fail("shape_mismatch", "gru '" + prefix_ + "': input " + xt.shape_str() + ", expected cols " +
                               std::to_string(in_));
  }
  auto gate = [&](const char* g, Value hh) {
    Value wx = t.matmul(x, t.param(store, prefix_ + ".W" + g));
    Value uh = t.matmul(hh, t.param(store, prefix_ + ".U" + g));
    return t.add_rowvec(t.add(wx, uh), t.param(store, prefix_ + ".b" + g));
  };
  Value r = t.sigmoid(gate("r", h));
  Value z = t.sigmoid(gate("z", h));
  Value n = t.tanh(gate("n", t.mul(r, h)));
  // h' = (1 - z) * n + z * h
  Value one_minus_z = t.add_scalar(t.scale(z, -1.0), 1.0);
  return t.add(t.mul(one_minus_z, n), t.mul(z, h));
}

std::vector<Value> Gru::encode(Tape& t, ParameterStore& store, const std::vector<Value>& xs) const {
  if (xs.empty()) fail("bad_argument", "gru '" + prefix_ + "': empty sequence");
  std::vector<Value> states;
  states.reserve(xs.size());
  Value h = zero_state(t, t.value(xs[0]).rows());
  for (Value x : xs) {
    h = step(t, store, x, h);
    states.push_back(h);
  }
  return states;
}

int64_t Gru::param_count() const { return 3 * (in_ * hidden_ + hidden_ * hidden_ + hidden_); }

TargetAttention::TargetAttention(ParameterStore& store, std::string prefix, int64_t query_in,
                                 int64_t seq_in, int64_t d, Rng& rng)
    : prefix_(std::move(prefix)), query_in_(query_in), seq_in_(seq_in), d_(d) {
  if (d <= 0) fail("bad_argument", "attention '" + prefix_ + "': d must be positive");
  store.create(prefix_ + ".Wq", xavier(rng, query_in_, d_));
  store.create(prefix_ + ".Wk", xavier(rng, seq_in_, d_));
  store.create(prefix_ + ".Wv", xavier(rng, seq_in_, d_));
}

TargetAttention::Result TargetAttention::forward(Tape& t, ParameterStore& store, Value target,
                                                 const std::vector<Value>& seq,
                                                 const std::vector<Value>* mask) const {
  if (seq.empty()) fail("bad_argument", "attention '" + prefix_ + "': empty sequence");
  if (mask && mask->size() != seq.size()) {
    fail("bad_argument", "attention '" + prefix_ + "': mask length " +
                             std::to_string(mask->size()) + " vs sequence " +
                             std::to_string(seq.size()));
  }
  Value q = t.matmul(target, t.param(store, prefix_ + ".Wq"));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d_));

  std::vector<Value> score_cols;
  std::vector<Value> value_rows;
  score_cols.reserve(seq.size());
  value_rows.reserve(seq.size());
  for (size_t i = 0; i < seq.size(); ++i) {
    Value ki = t.matmul(seq[i], t.param(store, prefix_ + ".Wk"));
    Value vi = t.matmul(seq[i], t.param(store, prefix_ + ".Wv"));
    Value s = t.scale(t.row_sum(t.mul(q, ki)), inv_sqrt_d);  // [B,1]
    if (mask) {
      // Padding steps get -1e9 added; exp underflows to exactly 0 weight.
      Value off = t.scale(t.add_scalar((*mask)[i], -1.0), 1e9);
      s = t.add(s, off);
    }
    score_cols.push_back(s);
    value_rows.push_back(vi);
  }

  Value weights = t.row_softmax(t.concat_cols(score_cols));  // [B,T]
  Value out;
  for (size_t i = 0; i < seq.size(); ++i) {
    Value wi = t.slice_cols(weights, static_cast<int64_t>(i), 1);
    Value term = t.mul_colvec(value_rows[i], wi);
    out = i == 0 ? term : t.add(out, term);
  }
  return {out, weights};
}

int64_t TargetAttention::param_count() const { return (query_in_ + 2 * seq_in_) * d_; }

Mmoe::Mmoe(ParameterStore& store, std::string prefix, int64_t in_dim, int64_t gate_in_dim,
           int64_t n_experts, const std::vector<int64_t>& expert_dims,
           const std::vector<TaskSpec>& tasks, Rng& rng)
    : prefix_(std::move(prefix)), gate_in_(gate_in_dim) {
  if (n_experts < 1) fail("bad_argument", "mmoe '" + prefix_ + "': need at least one expert");
  if (tasks.empty()) fail("bad_argument", "mmoe '" + prefix_ + "': need at least one task");

  std::vector<int64_t> edims;
  edims.push_back(in_dim);
  edims.insert(edims.end(), expert_dims.begin(), expert_dims.end());
  const int64_t expert_out = edims.back();

  for (int64_t e = 0; e < n_experts; ++e) {
    experts_.emplace_back(store, prefix_ + ".expert" + std::to_string(e), edims, Mlp::Out::relu,
                          rng);
  }
  for (size_t task = 0; task < tasks.size(); ++task) {
    store.create(prefix_ + ".gate" + std::to_string(task) + ".W",
                 xavier(rng, gate_in_dim, n_experts));
    store.create(prefix_ + ".gate" + std::to_string(task) + ".b", Tensor::zeros(1, n_experts));
    std::vector<int64_t> tdims;
    tdims.push_back(expert_out);
    tdims.insert(tdims.end(), tasks[task].tower_dims.begin(), tasks[task].tower_dims.end());
    towers_.emplace_back(store, prefix_ + ".tower" + std::to_string(task), tdims,
                         tasks[task].head, rng);
    heads_.push_back(tasks[task].head);
  }
}

Mmoe::Result Mmoe::forward(Tape& t, ParameterStore& store, Value x, Value gate_input) const {
  const Tensor& gt = t.value(gate_input);
  if (gt.cols() != gate_in_) {
    fail("shape_mismatch", "mmoe '" + prefix_ + "': gate input " + gt.shape_str() +
                               ", expected cols " + std::to_string(gate_in_));
  }
  std::vector<Value> expert_out;
  expert_out.reserve(experts_.size());
  for (const Mlp& e : experts_) expert_out.push_back(e.forward(t, store, x));

  Result res;
  for (size_t task = 0; task < towers_.size(); ++task) {
    Value gw = t.param(store, prefix_ + ".gate" + std::to_string(task) + ".W");
    Value gb = t.param(store, prefix_ + ".gate" + std::to_string(task) + ".b");
    Value gates = t.row_softmax(t.add_rowvec(t.matmul(gate_input, gw), gb));  // [B,E]

    Value mix;
    for (size_t e = 0; e < expert_out.size(); ++e) {
      Value we = t.slice_cols(gates, static_cast<int64_t>(e), 1);
      Value term = t.mul_colvec(expert_out[e], we);
      mix = e == 0 ? term : t.add(mix, term);
    }
    Value fused = t.relu(mix);
    res.tasks.push_back(towers_[task].forward(t, store, fused));
    res.gates.push_back(gates);
  }
  return res;
}

int64_t Mmoe::param_count() const {
  int64_t n = 0;
  for (const Mlp& e : experts_) n += e.param_count();
  for (const Mlp& tw : towers_) n += tw.param_count();
  n += static_cast<int64_t>(towers_.size()) *
       (gate_in_ * static_cast<int64_t>(experts_.size()) + static_cast<int64_t>(experts_.size()));
  return n;
}

Smmoe::Smmoe(ParameterStore& store, std::string prefix, int64_t in_dim, int64_t gate_in_dim,
             int64_t n_shared, const std::vector<int64_t>& expert_dims,
             const std::vector<Mmoe::TaskSpec>& tasks, Rng& rng)
    : prefix_(std::move(prefix)), gate_in_(gate_in_dim) {
  if (n_shared < 1) fail("bad_argument", "smmoe '" + prefix_ + "': need at least one shared expert");
  if (tasks.empty()) fail("bad_argument", "smmoe '" + prefix_ + "': need at least one task");

  std::vector<int64_t> edims;
  edims.push_back(in_dim);
  edims.insert(edims.end(), expert_dims.begin(), expert_dims.end());
  const int64_t expert_out = edims.back();
  const int64_t pool = n_shared + 2;

  for (int64_t e = 0; e < n_shared; ++e) {
    shared_.emplace_back(store, prefix_ + ".shared" + std::to_string(e), edims, Mlp::Out::relu,
                         rng);
  }
  scene_experts_.emplace_back(store, prefix_ + ".scene_android", edims, Mlp::Out::relu, rng);
  scene_experts_.emplace_back(store, prefix_ + ".scene_ios", edims, Mlp::Out::relu, rng);

  for (size_t task = 0; task < tasks.size(); ++task) {
    store.create(prefix_ + ".gate" + std::to_string(task) + ".W", xavier(rng, gate_in_dim, pool));
    store.create(prefix_ + ".gate" + std::to_string(task) + ".b", Tensor::zeros(1, pool));
    std::vector<int64_t> tdims;
    tdims.push_back(expert_out);
    tdims.insert(tdims.end(), tasks[task].tower_dims.begin(), tasks[task].tower_dims.end());
    towers_.emplace_back(store, prefix_ + ".tower" + std::to_string(task), tdims,
                         tasks[task].head, rng);
    heads_.push_back(tasks[task].head);
  }
}

Smmoe::Result Smmoe::forward(Tape& t, ParameterStore& store, Value x, Value gate_input,
                             Scene scene) const {
  const Tensor& gt = t.value(gate_input);
  if (gt.cols() != gate_in_) {
    fail("shape_mismatch", "smmoe '" + prefix_ + "': gate input " + gt.shape_str() +
                               ", expected cols " + std::to_string(gate_in_));
  }
  const int64_t n_shared = static_cast<int64_t>(shared_.size());
  const int64_t scene_col = n_shared + static_cast<int64_t>(scene);

  // Only the active pool runs forward; the inactive scene expert is absent
  // from the graph entirely, which is what makes its gradient exactly zero.
  std::vector<Value> expert_out;
  for (const Mlp& e : shared_) expert_out.push_back(e.forward(t, store, x));
  expert_out.push_back(scene_experts_[static_cast<size_t>(scene)].forward(t, store, x));

  Result res;
  for (size_t task = 0; task < towers_.size(); ++task) {
    Value gw = t.param(store, prefix_ + ".gate" + std::to_string(task) + ".W");
    Value gb = t.param(store, prefix_ + ".gate" + std::to_string(task) + ".b");
    Value logits = t.add_rowvec(t.matmul(gate_input, gw), gb);  // [B, shared+2]
    Value active = n_shared > 0
                       ? t.concat_cols({t.slice_cols(logits, 0, n_shared),
                                        t.slice_cols(logits, scene_col, 1)})
                       : t.slice_cols(logits, scene_col, 1);
    Value gates = t.row_softmax(active);  // [B, shared+1]

    Value mix;
    for (size_t e = 0; e < expert_out.size(); ++e) {
      Value we = t.slice_cols(gates, static_cast<int64_t>(e), 1);
      Value term = t.mul_colvec(expert_out[e], we);
      mix = e == 0 ? term : t.add(mix, term);
    }
    Value fused = t.relu(mix);
    res.tasks.push_back(towers_[task].forward(t, store, fused));
    res.gates.push_back(gates);
  }
  return res;
}

int64_t Smmoe::param_count() const {
  int64_t n = 0;
  for (const Mlp& e : shared_) n += e.param_count();
  for (const Mlp& e : scene_experts_) n += e.param_count();
  for (const Mlp& tw : towers_) n += tw.param_count();
  const int64_t pool = static_cast<int64_t>(shared_.size()) + 2;
  n += static_cast<int64_t>(towers_.size()) * (gate_in_ * pool + pool);
  return n;
}

EmbeddingTable::EmbeddingTable(ParameterStore& store, std::string name, int64_t vocab, int64_t dim,
                               Rng& rng)
    : name_(std::move(name)), vocab_(vocab), dim_(dim) {
  if (vocab < 1 || dim < 1) fail("bad_argument", "embedding '" + name_ + "': bad shape");
  Tensor init(vocab, dim);
  const double limit = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int64_t i = 0; i < init.size(); ++i) init[i] = rng.uniform(-limit, limit);
  store.create(name_, std::move(init));
}

Value EmbeddingTable::lookup(Tape& t, ParameterStore& store, const std::vector<int>& ids) const {
  std::vector<int> rows(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    rows[i] = (ids[i] >= 0 && ids[i] < vocab_) ? ids[i] : 0;
  }
  return t.gather_rows(t.param(store, name_), rows);
}

Value masked_mean_rows(Tape& t, const std::vector<Value>& steps, const std::vector<Tensor>& mask,
                       const Tensor& inv_len) {
  if (steps.empty() || steps.size() != mask.size()) {
    fail("bad_argument", "masked_mean_rows: " + std::to_string(steps.size()) + " steps, " +
                             std::to_string(mask.size()) + " masks");
  }
  Value acc;
  for (size_t i = 0; i < steps.size(); ++i) {
    Value m = t.mul_colvec(steps[i], t.input(mask[i]));
    acc = i == 0 ? m : t.add(acc, m);
  }
  Value pooled = t.mul_colvec(acc, t.input(inv_len));
  const Tensor& v = t.value(pooled);
  return t.add(pooled, t.input(Tensor::zeros(v.rows(), v.cols())));
}

void apply_checkpoint(ParameterStore& store, const ParameterStore& loaded) {
  for (auto& [name, p] : store.entries()) {
    if (!loaded.has(name)) {
      fail("bad_config", "checkpoint lacks parameter '" + name + "'");
    }
    const Tensor& src = loaded.get(name);
    if (!src.same_shape(p)) {
      fail("bad_config", "checkpoint parameter '" + name + "' is " + src.shape_str() +
                             ", model expects " + p.shape_str());
    }
    p = src;
  }
  for (const auto& [name, t] : loaded.entries()) {
    if (!store.has(name)) {
      fail("bad_config", "checkpoint has unknown parameter '" + name + "'");
    }
  }
}

}  // namespace edgesim
