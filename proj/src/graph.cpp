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

#include "edgesim/graph.hpp"

#include <cmath>

#include "edgesim/kernels.hpp"

namespace edgesim {
namespace {

enum OpCode : uint8_t {
  kLeaf,
  kParam,
  kMatmul,
  kAdd,
  kAddRowvec,
  kSub,
  kMul,
  kMulColvec,
  kMulRowvec,
  kBroadcastRows,
  kScale,
  kAddScalar,
  kConcatCols,
  kSliceCols,
  kSigmoid,
  kTanh,
  kRelu,
  kSoftplus,
  kLog,
  kExp,
  kRowSoftmax,
  kRowSum,
  kMeanRows,
  kMeanAll,
  kClamp,
  kGatherRows,
};

const char* op_name(uint8_t op) {
  static const char* names[] = {
      "leaf",      "param",     "matmul",   "add",      "add_rowvec", "sub",
      "mul",       "mul_colvec", "mul_rowvec", "broadcast_rows", "scale", "add_scalar",
      "concat_cols", "slice_cols",
      "sigmoid",   "tanh",      "relu",     "softplus", "log",        "exp",
      "row_softmax", "row_sum", "mean_rows", "mean_all", "clamp",     "gather_rows",
  };
  return names[op];
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

Tensor& ParameterStore::create(const std::string& name, Tensor init) {
  if (params_.count(name)) fail("bad_argument", "duplicate parameter '" + name + "'");
  return params_.emplace(name, std::move(init)).first->second;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) fail("bad_argument", "unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) fail("bad_argument", "unknown parameter '" + name + "'");
  return it->second;
}

int64_t ParameterStore::total_params() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

Value Tape::push(Node n) {
  if (n.op != kLeaf && n.op != kParam) {
    bool needs = false;
    if (n.a >= 0) needs = needs || nodes_[n.a].needs_grad;
    if (n.b >= 0) needs = needs || nodes_[n.b].needs_grad;
    for (int32_t i : n.inputs) needs = needs || nodes_[i].needs_grad;
    n.needs_grad = needs;
    if (check_finite_) check_output(n);
  }
  nodes_.push_back(std::move(n));
  return Value{static_cast<int32_t>(nodes_.size() - 1)};
}

Tape::Node& Tape::node(Value v) {
  if (!v.valid() || v.id >= static_cast<int32_t>(nodes_.size())) {
    fail("bad_argument", "invalid tape value handle");
  }
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Value v) const { return const_cast<Tape*>(this)->node(v); }

const Tensor& Tape::val(int32_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.val;
}

const Tensor& Tape::value(Value v) const {
  node(v);
  return val(v.id);
}

double Tape::scalar_value(Value v) const {
  const Tensor& t = val(v.id);
  if (t.size() != 1) fail("bad_argument", "scalar_value on tensor of shape " + t.shape_str());
  return t[0];
}

Tensor& Tape::grad_buf(int32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Tensor& v = val(id);
    n.grad = Tensor::zeros(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::check_output(const Node& n) const {
  if (!n.val.all_finite()) {
    fail("non_finite", std::string("non-finite output of ") + op_name(n.op));
  }
}

Value Tape::input(Tensor t) {
  if (!t.all_finite()) fail("non_finite", "non-finite input tensor " + t.shape_str());
  Node n;
  n.op = kLeaf;
  n.val = std::move(t);
  return push(std::move(n));
}

Value Tape::param(ParameterStore& store, const std::string& name) {
  if (bound_store_ && bound_store_ != &store) {
    fail("bad_argument", "tape bound to a different parameter store");
  }
  bound_store_ = &store;
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return Value{it->second};
  Node n;
  n.op = kParam;
  n.ref = &store.get(name);
  n.needs_grad = true;
  n.param_name = name;
  Value v = push(std::move(n));
  param_nodes_.emplace(name, v.id);
  return v;
}

Value Tape::binary(uint8_t op, Value a, Value b, bool same_shape) {
  node(a);
  node(b);
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (same_shape && !ta.same_shape(tb)) {
    fail("shape_mismatch", std::string(op_name(op)) + ": " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.val = Tensor::zeros(ta.rows(), ta.cols());
  const auto& k = kern::active();
  switch (op) {
    case kAdd: k.add(ta.data(), tb.data(), n.val.data(), ta.size()); break;
    case kSub: k.sub(ta.data(), tb.data(), n.val.data(), ta.size()); break;
    case kMul: k.mul(ta.data(), tb.data(), n.val.data(), ta.size()); break;
    default: fail("bad_argument", "binary: bad op");
  }
  return push(std::move(n));
}

Value Tape::add(Value a, Value b) { return binary(kAdd, a, b, true); }
Value Tape::sub(Value a, Value b) { return binary(kSub, a, b, true); }
Value Tape::mul(Value a, Value b) { return binary(kMul, a, b, true); }

Value Tape::matmul(Value a, Value b) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (ta.cols() != tb.rows()) {
    fail("shape_mismatch", "matmul: " + ta.shape_str() + " x " + tb.shape_str());
  }
  Node n;
  n.op = kMatmul;
  n.a = a.id;
  n.b = b.id;
  n.val = Tensor::zeros(ta.rows(), tb.cols());
  kern::active().matmul_nn(ta.data(), tb.data(), n.val.data(), ta.rows(), ta.cols(), tb.cols());
  return push(std::move(n));
}

Value Tape::add_rowvec(Value a, Value b) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (tb.rows() != 1 || tb.cols() != ta.cols()) {
    fail("shape_mismatch", "add_rowvec: " + ta.shape_str() + " + " + tb.shape_str());
  }
  Node n;
  n.op = kAddRowvec;
  n.a = a.id;
  n.b = b.id;
  n.val = Tensor::zeros(ta.rows(), ta.cols());
  const auto& k = kern::active();
  for (int64_t r = 0; r < ta.rows(); ++r) {
    k.add(ta.data() + r * ta.cols(), tb.data(), n.val.data() + r * ta.cols(), ta.cols());
  }
  return push(std::move(n));
}

Value Tape::mul_colvec(Value a, Value c) {
  const Tensor& ta = val(a.id);
  const Tensor& tc = val(c.id);
  if (tc.cols() != 1 || tc.rows() != ta.rows()) {
    fail("shape_mismatch", "mul_colvec: " + ta.shape_str() + " * " + tc.shape_str());
  }
  Node n;
  n.op = kMulColvec;
  n.a = a.id;
  n.b = c.id;
  n.val = Tensor::zeros(ta.rows(), ta.cols());
  const auto& k = kern::active();
  for (int64_t r = 0; r < ta.rows(); ++r) {
    k.scale(ta.data() + r * ta.cols(), tc[r], n.val.data() + r * ta.cols(), ta.cols());
  }
  return push(std::move(n));
}

Value Tape::mul_rowvec(Value a, Value b) {
  const Tensor& ta = val(a.id);
  const Tensor& tb = val(b.id);
  if (tb.rows() != 1 || tb.cols() != ta.cols()) {
    fail("shape_mismatch", "mul_rowvec: " + ta.shape_str() + " * " + tb.shape_str());
  }
  Node n;
  n.op = kMulRowvec;
  n.a = a.id;
  n.b = b.id;
  n.val = Tensor::zeros(ta.rows(), ta.cols());
  const auto& k = kern::active();
  for (int64_t r = 0; r < ta.rows(); ++r) {
    k.mul(ta.data() + r * ta.cols(), tb.data(), n.val.data() + r * ta.cols(), ta.cols());
  }
  return push(std::move(n));
}

Value Tape::broadcast_rows(Value a, int64_t m) {
  const Tensor& ta = val(a.id);
  if (ta.rows() != 1) fail("shape_mismatch", "broadcast_rows: input " + ta.shape_str());
  if (m < 1) fail("bad_argument", "broadcast_rows: row count " + std::to_string(m));
  Node n;
  n.op = kBroadcastRows;
  n.a = a.id;
  n.val = Tensor::zeros(m, ta.cols());
  for (int64_t r = 0; r < m; ++r) {
    for (int64_t c = 0; c < ta.cols(); ++c) n.val.at(r, c) = ta[c];
  }
  return push(std::move(n));
}

Value Tape::scale(Value a, double s) {
  const Tensor& ta = val(a.id);
  Node n;
  n.op = kScale;
  n.a = a.id;
  n.s0 = s;
  n.val = Tensor::zeros(ta.rows(), ta.cols());
  kern::active().scale(ta.data(), s, n.val.data(), ta.size());
  return push(std::move(n));
}

Value Tape::add_scalar(Value a, double s) {
  const Tensor& ta = val(a.id);
  Node n;
  n.op = kAddScalar;
  n.a = a.id;
  n.s0 = s;
  n.val = Tensor::zeros(ta.rows(), ta.cols());
  for (int64_t i = 0; i < ta.size(); ++i) n.val[i] = ta[i] + s;
  return push(std::move(n));
}

Value Tape::concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) fail("bad_argument", "concat_cols: no inputs");
  const int64_t rows = val(parts[0].id).rows();
  int64_t cols = 0;
  for (Value p : parts) {
    const Tensor& t = val(p.id);
    if (t.rows() != rows) {
      fail("shape_mismatch", "concat_cols: row mismatch " + t.shape_str() + " vs " +
                                 Tensor::shape_str(rows, -1));
    }
    cols += t.cols();
  }
  Node n;
  n.op = kConcatCols;
  n.val = Tensor::zeros(rows, cols);
  for (Value p : parts) n.inputs.push_back(p.id);
  int64_t off = 0;
  for (Value p : parts) {
    const Tensor& t = val(p.id);
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t c = 0; c < t.cols(); ++c) n.val.at(r, off + c) = t.at(r, c);
    }
    off += t.cols();
  }
  return push(std::move(n));
}

Value Tape::slice_cols(Value a, int64_t begin, int64_t count) {
  const Tensor& ta = val(a.id);
  if (begin < 0 || count < 0 || begin + count > ta.cols()) {
    fail("bad_argument", "slice_cols: [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") of " + ta.shape_str());
  }
  Node n;
  n.op = kSliceCols;
  n.a = a.id;
  n.s0 = static_cast<double>(begin);
  n.val = Tensor::zeros(ta.rows(), count);
  for (int64_t r = 0; r < ta.rows(); ++r) {
    for (int64_t c = 0; c < count; ++c) n.val.at(r, c) = ta.at(r, begin + c);
  }
  return push(std::move(n));
}

Value Tape::unary(uint8_t op, Value a) {
  const Tensor& ta = val(a.id);
  Node n;
  n.op = op;
  n.a = a.id;
  n.val = Tensor::zeros(ta.rows(), ta.cols());
  switch (op) {
    case kSigmoid:
      for (int64_t i = 0; i < ta.size(); ++i) n.val[i] = stable_sigmoid(ta[i]);
      break;
    case kTanh:
      for (int64_t i = 0; i < ta.size(); ++i) n.val[i] = std::tanh(ta[i]);
      break;
    case kRelu:
      kern::active().relu(ta.data(), n.val.data(), ta.size());
      break;
    case kSoftplus:
      for (int64_t i = 0; i < ta.size(); ++i) n.val[i] = stable_softplus(ta[i]);
      break;
    case kLog:
      for (int64_t i = 0; i < ta.size(); ++i) {
        if (!(ta[i] > 0.0)) fail("non_finite", "log of non-positive value");
        n.val[i] = std::log(ta[i]);
      }
      break;
    case kExp:
      for (int64_t i = 0; i < ta.size(); ++i) n.val[i] = std::exp(ta[i]);
      break;
    default: fail("bad_argument", "unary: bad op");
  }
  return push(std::move(n));
}

Value Tape::sigmoid(Value a) { return unary(kSigmoid, a); }
Value Tape::tanh(Value a) { return unary(kTanh, a); }
Value Tape::relu(Value a) { return unary(kRelu, a); }
Value Tape::softplus(Value a) { return unary(kSoftplus, a); }
Value Tape::log(Value a) { return unary(kLog, a); }
Value Tape::exp(Value a) { return unary(kExp, a); }

Value Tape::row_softmax(Value a) {
  const Tensor& ta = val(a.id);
  if (ta.cols() < 1) fail("bad_argument", "row_softmax: empty rows");
  Node n;
  n.op = kRowSoftmax;
  n.a = a.id;
  n.val = Tensor::zeros(ta.rows(), ta.cols());
  for (int64_t r = 0; r < ta.rows(); ++r) {
    const double* x = ta.data() + r * ta.cols();
    double* y = n.val.data() + r * ta.cols();
    double m = x[0];
    for (int64_t c = 1; c < ta.cols(); ++c) m = std::max(m, x[c]);
    double s = 0.0;
    for (int64_t c = 0; c < ta.cols(); ++c) {
      y[c] = std::exp(x[c] - m);
      s += y[c];
    }
    const double inv = 1.0 / s;
    for (int64_t c = 0; c < ta.cols(); ++c) y[c] *= inv;
  }
  return push(std::move(n));
}

Value Tape::row_sum(Value a) {
  const Tensor& ta = val(a.id);
  Node n;
  n.op = kRowSum;
  n.a = a.id;
  n.val = Tensor::zeros(ta.rows(), 1);
  for (int64_t r = 0; r < ta.rows(); ++r) {
    double s = 0.0;
    for (int64_t c = 0; c < ta.cols(); ++c) s += ta.at(r, c);
    n.val[r] = s;
  }
  return push(std::move(n));
}

Value Tape::mean_rows(Value a) {
  const Tensor& ta = val(a.id);
  if (ta.rows() < 1) fail("bad_argument", "mean_rows: no rows");
  Node n;
  n.op = kMeanRows;
  n.a = a.id;
  n.val = Tensor::zeros(1, ta.cols());
  for (int64_t r = 0; r < ta.rows(); ++r) {
    for (int64_t c = 0; c < ta.cols(); ++c) n.val[c] += ta.at(r, c);
  }
  const double inv = 1.0 / static_cast<double>(ta.rows());
  for (int64_t c = 0; c < ta.cols(); ++c) n.val[c] *= inv;
  return push(std::move(n));
}

Value Tape::mean_all(Value a) {
  const Tensor& ta = val(a.id);
  if (ta.size() < 1) fail("bad_argument", "mean_all: empty tensor");
  Node n;
  n.op = kMeanAll;
  n.a = a.id;
  n.val = Tensor::zeros(1, 1);
  double s = 0.0;
  for (int64_t i = 0; i < ta.size(); ++i) s += ta[i];
  n.val[0] = s / static_cast<double>(ta.size());
  return push(std::move(n));
}

Value Tape::clamp(Value a, double lo, double hi) {
  const Tensor& ta = val(a.id);
  Node n;
  n.op = kClamp;
  n.a = a.id;
  n.s0 = lo;
  n.s1 = hi;
  n.val = Tensor::zeros(ta.rows(), ta.cols());
  for (int64_t i = 0; i < ta.size(); ++i) {
    n.val[i] = ta[i] < lo ? lo : (ta[i] > hi ? hi : ta[i]);
  }
  return push(std::move(n));
}

Value Tape::gather_rows(Value table, const std::vector<int>& ids) {
  const Tensor& tt = val(table.id);
  Node n;
  n.op = kGatherRows;
  n.a = table.id;
  n.ids = ids;
  n.val = Tensor::zeros(static_cast<int64_t>(ids.size()), tt.cols());
  for (size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= tt.rows()) {
      fail("bad_argument", "gather_rows: index " + std::to_string(ids[r]) + " out of " +
                               std::to_string(tt.rows()) + " rows");
    }
    for (int64_t c = 0; c < tt.cols(); ++c) n.val.at(static_cast<int64_t>(r), c) = tt.at(ids[r], c);
  }
  return push(std::move(n));
}

GradientMap Tape::backward(Value loss) {
  if (backward_done_) fail("bad_argument", "backward called twice without reset");
  backward_done_ = true;
  Node& ln = node(loss);
  const Tensor& lv = val(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1) {
    fail("bad_argument", "backward: loss must be a scalar, got " + lv.shape_str());
  }
  GradientMap out;
  if (!ln.needs_grad) {
    // No trainable leaves feed the loss; still report zeros for the params on
    // the tape so callers get shape-complete maps.
    for (const auto& [name, id] : param_nodes_) {
      const Tensor& p = val(id);
      out.emplace(name, Tensor::zeros(p.rows(), p.cols()));
    }
    return out;
  }

  grad_buf(loss.id)[0] = 1.0;
  const auto& k = kern::active();

  for (int32_t id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    const Tensor& g = n.grad;
    auto want = [&](int32_t in) { return in >= 0 && nodes_[in].needs_grad; };

    switch (n.op) {
      case kLeaf:
      case kParam:
        break;
      case kMatmul: {
        const Tensor& A = val(n.a);
        const Tensor& B = val(n.b);
        if (want(n.a)) {
          k.matmul_nt(g.data(), B.data(), grad_buf(n.a).data(), g.rows(), g.cols(), A.cols());
        }
        if (want(n.b)) {
          k.matmul_tn(A.data(), g.data(), grad_buf(n.b).data(), A.rows(), A.cols(), g.cols());
        }
        break;
      }
      case kAdd:
        if (want(n.a)) k.axpy(1.0, g.data(), grad_buf(n.a).data(), g.size());
        if (want(n.b)) k.axpy(1.0, g.data(), grad_buf(n.b).data(), g.size());
        break;
      case kAddRowvec: {
        if (want(n.a)) k.axpy(1.0, g.data(), grad_buf(n.a).data(), g.size());
        if (want(n.b)) {
          Tensor& gb = grad_buf(n.b);
          for (int64_t r = 0; r < g.rows(); ++r) {
            k.axpy(1.0, g.data() + r * g.cols(), gb.data(), g.cols());
          }
        }
        break;
      }
      case kSub:
        if (want(n.a)) k.axpy(1.0, g.data(), grad_buf(n.a).data(), g.size());
        if (want(n.b)) k.axpy(-1.0, g.data(), grad_buf(n.b).data(), g.size());
        break;
      case kMul: {
        const Tensor& A = val(n.a);
        const Tensor& B = val(n.b);
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
        }
        if (want(n.b)) {
          Tensor& gb = grad_buf(n.b);
          for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
        }
        break;
      }
      case kMulColvec: {
        const Tensor& A = val(n.a);
        const Tensor& C = val(n.b);
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (int64_t r = 0; r < g.rows(); ++r) {
            k.axpy(C[r], g.data() + r * g.cols(), ga.data() + r * g.cols(), g.cols());
          }
        }
        if (want(n.b)) {
          Tensor& gc = grad_buf(n.b);
          for (int64_t r = 0; r < g.rows(); ++r) {
            gc[r] += k.dot(g.data() + r * g.cols(), A.data() + r * g.cols(), g.cols());
          }
        }
        break;
      }
      case kMulRowvec: {
        const Tensor& A = val(n.a);
        const Tensor& B = val(n.b);
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (int64_t r = 0; r < g.rows(); ++r) {
            for (int64_t c = 0; c < g.cols(); ++c) ga.at(r, c) += g.at(r, c) * B[c];
          }
        }
        if (want(n.b)) {
          Tensor& gb = grad_buf(n.b);
          for (int64_t r = 0; r < g.rows(); ++r) {
            for (int64_t c = 0; c < g.cols(); ++c) gb[c] += g.at(r, c) * A.at(r, c);
          }
        }
        break;
      }
      case kBroadcastRows: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (int64_t r = 0; r < g.rows(); ++r) {
            k.axpy(1.0, g.data() + r * g.cols(), ga.data(), g.cols());
          }
        }
        break;
      }
      case kScale:
        if (want(n.a)) k.axpy(n.s0, g.data(), grad_buf(n.a).data(), g.size());
        break;
      case kAddScalar:
        if (want(n.a)) k.axpy(1.0, g.data(), grad_buf(n.a).data(), g.size());
        break;
      case kConcatCols: {
        int64_t off = 0;
        for (int32_t in : n.inputs) {
          const Tensor& t = val(in);
          if (nodes_[in].needs_grad) {
            Tensor& gi = grad_buf(in);
            for (int64_t r = 0; r < g.rows(); ++r) {
              for (int64_t c = 0; c < t.cols(); ++c) gi.at(r, c) += g.at(r, off + c);
            }
          }
          off += t.cols();
        }
        break;
      }
      case kSliceCols: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          const int64_t begin = static_cast<int64_t>(n.s0);
          for (int64_t r = 0; r < g.rows(); ++r) {
            for (int64_t c = 0; c < g.cols(); ++c) ga.at(r, begin + c) += g.at(r, c);
          }
        }
        break;
      }
      case kSigmoid: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.val[i] * (1.0 - n.val[i]);
        }
        break;
      }
      case kTanh: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.val[i] * n.val[i]);
        }
        break;
      }
      case kRelu: {
        if (want(n.a)) {
          const Tensor& A = val(n.a);
          Tensor& ga = grad_buf(n.a);
          for (int64_t i = 0; i < g.size(); ++i) {
            if (A[i] > 0.0) ga[i] += g[i];
          }
        }
        break;
      }
      case kSoftplus: {
        if (want(n.a)) {
          const Tensor& A = val(n.a);
          Tensor& ga = grad_buf(n.a);
          for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * stable_sigmoid(A[i]);
        }
        break;
      }
      case kLog: {
        if (want(n.a)) {
          const Tensor& A = val(n.a);
          Tensor& ga = grad_buf(n.a);
          for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] / A[i];
        }
        break;
      }
      case kExp: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.val[i];
        }
        break;
      }
      case kRowSoftmax: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (int64_t r = 0; r < g.rows(); ++r) {
            const double* y = n.val.data() + r * g.cols();
            const double* gr = g.data() + r * g.cols();
            double dotgy = 0.0;
            for (int64_t c = 0; c < g.cols(); ++c) dotgy += gr[c] * y[c];
            double* gar = ga.data() + r * g.cols();
            for (int64_t c = 0; c < g.cols(); ++c) gar[c] += y[c] * (gr[c] - dotgy);
          }
        }
        break;
      }
      case kRowSum: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (int64_t r = 0; r < ga.rows(); ++r) {
            for (int64_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += g[r];
          }
        }
        break;
      }
      case kMeanRows: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          const double inv = 1.0 / static_cast<double>(ga.rows());
          for (int64_t r = 0; r < ga.rows(); ++r) {
            for (int64_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += g[c] * inv;
          }
        }
        break;
      }
      case kMeanAll: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          const double gv = g[0] / static_cast<double>(ga.size());
          for (int64_t i = 0; i < ga.size(); ++i) ga[i] += gv;
        }
        break;
      }
      case kClamp: {
        if (want(n.a)) {
          const Tensor& A = val(n.a);
          Tensor& ga = grad_buf(n.a);
          for (int64_t i = 0; i < g.size(); ++i) {
            if (A[i] > n.s0 && A[i] < n.s1) ga[i] += g[i];
          }
        }
        break;
      }
      case kGatherRows: {
        if (want(n.a)) {
          Tensor& ga = grad_buf(n.a);
          for (size_t r = 0; r < n.ids.size(); ++r) {
            k.axpy(1.0, g.data() + static_cast<int64_t>(r) * g.cols(),
                   ga.data() + static_cast<int64_t>(n.ids[r]) * g.cols(), g.cols());
          }
        }
        break;
      }
      default:
        fail("bad_argument", "backward: unhandled op");
    }
  }

  GradientMap out2;
  for (const auto& [name, id] : param_nodes_) {
    Node& pn = nodes_[id];
    if (pn.grad.empty()) {
      const Tensor& p = val(id);
      out2.emplace(name, Tensor::zeros(p.rows(), p.cols()));
    } else {
      out2.emplace(name, std::move(pn.grad));
    }
  }
  return out2;
}

void Tape::reset() {
  nodes_.clear();
  param_nodes_.clear();
  bound_store_ = nullptr;
  backward_done_ = false;
}

Value bce_loss(Tape& t, Value predictions, const Tensor& labels) {
  const Tensor& p = t.value(predictions);
  if (!p.same_shape(labels)) {
    fail("shape_mismatch", "bce_loss: " + p.shape_str() + " vs " + labels.shape_str());
  }
  if (labels.size() == 0) fail("bad_argument", "bce_loss: empty batch");
  for (int64_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      fail("bad_label", "bce_loss: label " + std::to_string(labels[i]) + " not in {0,1}");
    }
  }
  Value y = t.input(labels);
  Value ph = t.clamp(predictions, kBceEpsilon, 1.0 - kBceEpsilon);
  Value one_minus_y = t.add_scalar(t.scale(y, -1.0), 1.0);
  Value one_minus_p = t.add_scalar(t.scale(ph, -1.0), 1.0);
  Value ll = t.add(t.mul(y, t.log(ph)), t.mul(one_minus_y, t.log(one_minus_p)));
  return t.scale(t.mean_all(ll), -1.0);
}

Value mse_loss(Tape& t, Value predictions, const Tensor& labels) {
  const Tensor& p = t.value(predictions);
  if (!p.same_shape(labels)) {
    fail("shape_mismatch", "mse_loss: " + p.shape_str() + " vs " + labels.shape_str());
  }
  if (labels.size() == 0) fail("bad_argument", "mse_loss: empty batch");
  Value y = t.input(labels);
  Value d = t.sub(y, predictions);
  return t.mean_all(t.mul(d, d));
}

}  // namespace edgesim
