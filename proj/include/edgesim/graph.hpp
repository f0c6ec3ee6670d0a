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
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgesim/tensor.hpp"

namespace edgesim {

// Named trainable tensors. Name order is the canonical iteration order for
// gradient aggregation, optimizer updates, and checkpoints.
class ParameterStore {
 public:
  Tensor& create(const std::string& name, Tensor init);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  const std::map<std::string, Tensor>& entries() const { return params_; }
  std::map<std::string, Tensor>& entries() { return params_; }
  int64_t total_params() const;

 private:
  std::map<std::string, Tensor> params_;
};

// Gradient of a scalar loss w.r.t. each named parameter, shapes matching.
using GradientMap = std::map<std::string, Tensor>;

class Tape;

// Handle to a node on a tape.
struct Value {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. A tape is rebuilt per forward pass: create leaves, apply
// primitives, call backward() once, reset() to reuse the allocation.
// Single-threaded per tape.
class Tape {
 public:
  // When set, every primitive output is scanned for non-finite values
  // (slow; enabled in tests and gradient checks).
  explicit Tape(bool check_finite = false) : check_finite_(check_finite) {}

  // Constant leaf; data must be finite.
  Value input(Tensor t);
  // Trainable leaf bound to store[name]; one node per name per tape. All
  // params on one tape must come from the same store.
  Value param(ParameterStore& store, const std::string& name);

  Value matmul(Value a, Value b);
  Value add(Value a, Value b);
  Value add_rowvec(Value a, Value b);  // a[m,n] + row b[1,n]
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value mul_colvec(Value a, Value c);  // a[m,n] * column c[m,1]
  Value mul_rowvec(Value a, Value b);  // a[m,n] * row b[1,n]
  Value broadcast_rows(Value a, int64_t m);  // row a[1,n] tiled to [m,n]
  Value scale(Value a, double s);
  Value add_scalar(Value a, double s);
  Value concat_cols(const std::vector<Value>& parts);
  Value slice_cols(Value a, int64_t begin, int64_t count);
  Value sigmoid(Value a);
  Value tanh(Value a);
  Value relu(Value a);
  Value softplus(Value a);
  Value log(Value a);  // requires strictly positive input
  Value exp(Value a);
  Value row_softmax(Value a);
  Value row_sum(Value a);    // [m,n] -> [m,1]
  Value mean_rows(Value a);  // [m,n] -> [1,n]
  Value mean_all(Value a);   // -> [1,1]
  Value clamp(Value a, double lo, double hi);
  // rows of table selected by ids; gradient scatter-adds in id order.
  Value gather_rows(Value table, const std::vector<int>& ids);

  const Tensor& value(Value v) const;
  double scalar_value(Value v) const;

  // Gradients of a scalar loss w.r.t. every param leaf on the tape. May be
  // called once per forward pass; reset() before reuse.
  GradientMap backward(Value loss);

  void reset();
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    uint8_t op;
    int32_t a = -1;
    int32_t b = -1;
    bool needs_grad = false;
    double s0 = 0.0, s1 = 0.0;
    Tensor val;
    const Tensor* ref = nullptr;  // param leaves alias store memory
    Tensor grad;
    std::vector<int32_t> inputs;  // concat only
    std::vector<int> ids;         // gather only
    std::string param_name;
  };

  Value push(Node n);
  Node& node(Value v);
  const Node& node(Value v) const;
  const Tensor& val(int32_t id) const;
  Tensor& grad_buf(int32_t id);
  void check_output(const Node& n) const;
  Value unary(uint8_t op, Value a);
  Value binary(uint8_t op, Value a, Value b, bool same_shape);

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int32_t> param_nodes_;
  const ParameterStore* bound_store_ = nullptr;
  bool check_finite_ = false;
  bool backward_done_ = false;
};

// -(1/N) sum[y log p + (1-y) log(1-p)] with p clamped to
// [kBceEpsilon, 1-kBceEpsilon]. Labels must be exactly 0 or 1.
inline constexpr double kBceEpsilon = 1e-7;
Value bce_loss(Tape& t, Value predictions, const Tensor& labels);

// (1/N) sum (y - p)^2
Value mse_loss(Tape& t, Value predictions, const Tensor& labels);

}  // namespace edgesim
