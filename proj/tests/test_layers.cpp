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
#include "doctest.h"

#include <cmath>

#include "edgesim/layers.hpp"
#include "edgesim/rng.hpp"
#include "gradcheck.hpp"

using namespace edgesim;

namespace {

Tensor random_tensor(Rng& rng, int64_t rows, int64_t cols, double scale = 1.0) {
  Tensor t(rows, cols);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, scale);
  return t;
}

void zero_params(ParameterStore& store, const std::string& prefix) {
  for (auto& [name, p] : store.entries()) {
    if (name.rfind(prefix, 0) == 0) {
      for (int64_t i = 0; i < p.size(); ++i) p[i] = 0.0;
    }
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain-loop affine + activation against store params, one row.
std::vector<double> ref_mlp(const ParameterStore& store, const std::string& prefix,
                            std::vector<double> x, int layers, const char* head) {
  for (int l = 0; l < layers; ++l) {
    const Tensor& W = store.get(prefix + ".W" + std::to_string(l));
    const Tensor& b = store.get(prefix + ".b" + std::to_string(l));
    std::vector<double> y(static_cast<size_t>(W.cols()), 0.0);
    for (int64_t j = 0; j < W.cols(); ++j) {
      double acc = b[j];
      for (int64_t i = 0; i < W.rows(); ++i) acc += x[static_cast<size_t>(i)] * W.at(i, j);
      y[static_cast<size_t>(j)] = acc;
    }
    const std::string act = l == layers - 1 ? head : "relu";
    for (double& v : y) {
      if (act == "relu") {
        v = v > 0 ? v : 0;
      } else if (act == "sigmoid") {
        v = sigmoid(v);
      }
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("mlp forward examples") {
  Rng rng(derive_seed(1, "mlp"));

  ParameterStore s1;
  Mlp m1(s1, "m", {3, 4, 2}, Mlp::Out::linear, rng);
  zero_params(s1, "m");
  Tape t1;
  const Tensor& y1 = t1.value(m1.forward(t1, s1, t1.input(Tensor::row({1, 2, 3}))));
  CHECK(y1.cols() == 2);
  CHECK(y1[0] == 0.0);
  CHECK(y1[1] == 0.0);

  ParameterStore s2;
  Mlp m2(s2, "m", {2, 2}, Mlp::Out::relu, rng);
  zero_params(s2, "m");
  s2.get("m.W0").at(0, 0) = 1.0;
  s2.get("m.W0").at(1, 1) = 1.0;
  Tape t2;
  const Tensor& y2 = t2.value(m2.forward(t2, s2, t2.input(Tensor::row({-1, 2}))));
  CHECK(y2[0] == 0.0);
  CHECK(y2[1] == 2.0);

  ParameterStore s3;
  Mlp m3(s3, "m", {1, 1}, Mlp::Out::linear, rng);
  s3.get("m.W0")[0] = 2.0;
  s3.get("m.b0")[0] = 1.0;
  Tape t3;
  CHECK(t3.scalar_value(m3.forward(t3, s3, t3.input(Tensor::scalar(3.0)))) == doctest::Approx(7.0));

  CHECK_THROWS_AS(m3.forward(t3, s3, t3.input(Tensor::row({1, 2}))), Error);
  CHECK(m1.param_count() == 3 * 4 + 4 + 4 * 2 + 2);
}

TEST_CASE("mlp batches rows independently") {
  Rng rng(derive_seed(2, "mlp-batch"));
  ParameterStore s;
  Mlp m(s, "m", {3, 5, 2}, Mlp::Out::sigmoid, rng);

  Tensor batch = random_tensor(rng, 4, 3);
  Tape t;
  const Tensor& out = t.value(m.forward(t, s, t.input(batch)));

  for (int64_t r = 0; r < 4; ++r) {
    Tape tr;
    Tensor row(1, 3);
    for (int64_t c = 0; c < 3; ++c) row[c] = batch.at(r, c);
    const Tensor& orow = tr.value(m.forward(tr, s, tr.input(row)));
    for (int64_t c = 0; c < 2; ++c) CHECK(out.at(r, c) == doctest::Approx(orow[c]).epsilon(1e-12));
  }
}

TEST_CASE("gru zero params give zero states") {
  Rng rng(derive_seed(3, "gru0"));
  ParameterStore s;
  Gru gru(s, "g", 3, 4, rng);
  zero_params(s, "g");

  Tape t;
  std::vector<Value> xs = {t.input(Tensor::row({1, -2, 3})), t.input(Tensor::row({0.5, 0, -1}))};
  auto states = gru.encode(t, s, xs);
  REQUIRE(states.size() == 2);
  for (Value h : states) {
    const Tensor& ht = t.value(h);
    for (int64_t i = 0; i < ht.size(); ++i) CHECK(ht[i] == 0.0);
  }
}

TEST_CASE("gru one-step hand trace at dim 2") {
  ParameterStore s;
  Rng rng(derive_seed(4, "gru-hand"));
  Gru gru(s, "g", 2, 2, rng);

  auto set = [&](const std::string& name, std::vector<double> v) {
    Tensor& p = s.get("g." + name);
    REQUIRE(p.size() == static_cast<int64_t>(v.size()));
    for (int64_t i = 0; i < p.size(); ++i) p[i] = v[i];
  };
  set("Wr", {0.1, -0.2, 0.3, 0.4});
  set("Ur", {0.05, 0.1, -0.1, 0.2});
  set("br", {0.01, -0.02});
  set("Wz", {-0.3, 0.2, 0.1, -0.1});
  set("Uz", {0.2, -0.05, 0.15, 0.1});
  set("bz", {0.03, 0.04});
  set("Wn", {0.5, -0.4, 0.25, 0.35});
  set("Un", {-0.2, 0.1, 0.05, -0.15});
  set("bn", {-0.01, 0.02});

  const double x0 = 0.7, x1 = -0.3;
  const double h0 = 0.2, h1 = -0.5;

  auto cell = [&](const std::string& W, const std::string& U, const std::string& b, double a0,
                  double a1, int j) {
    const Tensor& Wt = s.get("g." + W);
    const Tensor& Ut = s.get("g." + U);
    const Tensor& bt = s.get("g." + b);
    return x0 * Wt.at(0, j) + x1 * Wt.at(1, j) + a0 * Ut.at(0, j) + a1 * Ut.at(1, j) + bt[j];
  };
  const double r0 = sigmoid(cell("Wr", "Ur", "br", h0, h1, 0));
  const double r1 = sigmoid(cell("Wr", "Ur", "br", h0, h1, 1));
  const double z0 = sigmoid(cell("Wz", "Uz", "bz", h0, h1, 0));
  const double z1 = sigmoid(cell("Wz", "Uz", "bz", h0, h1, 1));
  const double n0 = std::tanh(cell("Wn", "Un", "bn", r0 * h0, r1 * h1, 0));
  const double n1 = std::tanh(cell("Wn", "Un", "bn", r0 * h0, r1 * h1, 1));
  const double e0 = (1 - z0) * n0 + z0 * h0;
  const double e1 = (1 - z1) * n1 + z1 * h1;

  Tape t;
  Value h = t.input(Tensor::row({h0, h1}));
  Value x = t.input(Tensor::row({x0, x1}));
  const Tensor& got = t.value(gru.step(t, s, x, h));
  CHECK(got[0] == doctest::Approx(e0).epsilon(1e-14));
  CHECK(got[1] == doctest::Approx(e1).epsilon(1e-14));
}

TEST_CASE("gru order sensitivity across seeds") {
  int differing = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, "gru-order"));
    ParameterStore s;
    Gru gru(s, "g", 3, 4, rng);
    std::vector<Tensor> steps;
    for (int i = 0; i < 3; ++i) steps.push_back(random_tensor(rng, 1, 3));

    auto final_state = [&](const std::vector<int>& order) {
      Tape t;
      std::vector<Value> xs;
      for (int i : order) xs.push_back(t.input(steps[static_cast<size_t>(i)]));
      auto states = gru.encode(t, s, xs);
      return t.value(states.back());
    };
    const Tensor a = final_state({0, 1, 2});
    const Tensor b = final_state({2, 1, 0});
    bool diff = false;
    for (int64_t i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) diff = true;
    }
    if (diff) ++differing;
  }
  CHECK(differing >= 19);
}

TEST_CASE("gru states bounded by tanh") {
  Rng rng(derive_seed(9, "gru-bound"));
  ParameterStore s;
  Gru gru(s, "g", 4, 6, rng);
  Tape t;
  std::vector<Value> xs;
  for (int i = 0; i < 8; ++i) xs.push_back(t.input(random_tensor(rng, 5, 4, 3.0)));
  for (Value h : gru.encode(t, s, xs)) {
    const Tensor& ht = t.value(h);
    for (int64_t i = 0; i < ht.size(); ++i) {
      CHECK(ht[i] > -1.0);
      CHECK(ht[i] < 1.0);
    }
  }
}

TEST_CASE("gru gradcheck") {
  Rng rng(derive_seed(10, "gru-grad"));
  ParameterStore s;
  Gru gru(s, "g", 3, 4, rng);
  std::vector<Tensor> steps;
  for (int i = 0; i < 3; ++i) steps.push_back(random_tensor(rng, 2, 3));

  auto fn = [&](Tape& t, ParameterStore& store) {
    std::vector<Value> xs;
    for (const Tensor& st : steps) xs.push_back(t.input(st));
    auto states = gru.encode(t, store, xs);
    return t.mean_all(states.back());
  };
  auto res = testutil::gradcheck(s, fn);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("attention singleton and symmetry") {
  Rng rng(derive_seed(5, "attn"));
  ParameterStore s;
  TargetAttention attn(s, "a", 3, 4, 2, rng);

  Tensor target = random_tensor(rng, 1, 3);
  Tensor e0 = random_tensor(rng, 1, 4);

  Tape t;
  auto r1 = attn.forward(t, s, t.input(target), {t.input(e0)});
  CHECK(t.value(r1.weights)[0] == doctest::Approx(1.0).epsilon(1e-15));
  // Singleton weight is 1, so the output is that element's value projection.
  Value v0 = t.matmul(t.input(e0), t.param(s, "a.Wv"));
  for (int64_t i = 0; i < 2; ++i) {
    CHECK(t.value(r1.out)[i] == doctest::Approx(t.value(v0)[i]).epsilon(1e-14));
  }

  auto r2 = attn.forward(t, s, t.input(target), {t.input(e0), t.input(e0)});
  CHECK(t.value(r2.weights)[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.value(r2.weights)[1] == doctest::Approx(0.5).epsilon(1e-14));

  CHECK_THROWS_AS(attn.forward(t, s, t.input(target), {}), Error);
}

TEST_CASE("attention d=2 brute force oracle") {
  ParameterStore s;
  Rng rng(derive_seed(6, "attn-hand"));
  TargetAttention attn(s, "a", 2, 2, 2, rng);

  const Tensor& Wq = s.get("a.Wq");
  const Tensor& Wk = s.get("a.Wk");
  const Tensor& Wv = s.get("a.Wv");

  const std::vector<double> tgt = {0.4, -0.7};
  const std::vector<std::vector<double>> seq = {{1.0, 0.2}, {-0.5, 0.9}};

  auto proj = [](const Tensor& W, const std::vector<double>& x) {
    std::vector<double> y(2, 0.0);
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 2; ++i) y[j] += x[static_cast<size_t>(i)] * W.at(i, j);
    }
    return y;
  };
  const auto q = proj(Wq, tgt);
  const auto k0 = proj(Wk, seq[0]), k1 = proj(Wk, seq[1]);
  const auto v0 = proj(Wv, seq[0]), v1 = proj(Wv, seq[1]);
  const double s0 = (q[0] * k0[0] + q[1] * k0[1]) / std::sqrt(2.0);
  const double s1 = (q[0] * k1[0] + q[1] * k1[1]) / std::sqrt(2.0);
  const double m = std::max(s0, s1);
  const double w0 = std::exp(s0 - m) / (std::exp(s0 - m) + std::exp(s1 - m));
  const double w1 = 1.0 - w0;
  const std::vector<double> expect = {w0 * v0[0] + w1 * v1[0], w0 * v0[1] + w1 * v1[1]};

  Tape t;
  auto r = attn.forward(t, s, t.input(Tensor::row(tgt)),
                        {t.input(Tensor::row(seq[0])), t.input(Tensor::row(seq[1]))});
  CHECK(std::abs(t.value(r.out)[0] - expect[0]) < 1e-12);
  CHECK(std::abs(t.value(r.out)[1] - expect[1]) < 1e-12);
  CHECK(t.value(r.weights)[0] == doctest::Approx(w0).epsilon(1e-12));
}

TEST_CASE("attention mask zeroes padding steps exactly") {
  Rng rng(derive_seed(7, "attn-mask"));
  ParameterStore s;
  TargetAttention attn(s, "a", 3, 3, 4, rng);

  Tensor target = random_tensor(rng, 2, 3);
  std::vector<Tensor> seq = {random_tensor(rng, 2, 3), random_tensor(rng, 2, 3),
                             random_tensor(rng, 2, 3)};
  // Row 0 has all three steps, row 1 only the first.
  Tensor m0 = Tensor::from(2, 1, {1, 1});
  Tensor m1 = Tensor::from(2, 1, {1, 0});
  Tensor m2 = Tensor::from(2, 1, {1, 0});

  Tape t;
  std::vector<Value> xs = {t.input(seq[0]), t.input(seq[1]), t.input(seq[2])};
  std::vector<Value> mask = {t.input(m0), t.input(m1), t.input(m2)};
  auto r = attn.forward(t, s, t.input(target), xs, &mask);
  const Tensor& w = t.value(r.weights);
  CHECK(w.at(1, 1) == 0.0);
  CHECK(w.at(1, 2) == 0.0);
  CHECK(w.at(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w.at(0, 0) + w.at(0, 1) + w.at(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("attention weights form a simplex and output stays in value hull") {
  Rng rng(derive_seed(8, "attn-hull"));
  ParameterStore s;
  TargetAttention attn(s, "a", 2, 2, 1, rng);

  Tensor target = random_tensor(rng, 1, 2);
  std::vector<Tensor> seq = {random_tensor(rng, 1, 2), random_tensor(rng, 1, 2),
                             random_tensor(rng, 1, 2)};
  Tape t;
  std::vector<Value> xs;
  for (auto& e : seq) xs.push_back(t.input(e));
  auto r = attn.forward(t, s, t.input(target), xs);

  double wsum = 0.0, vmin = 1e300, vmax = -1e300;
  for (int i = 0; i < 3; ++i) {
    wsum += t.value(r.weights)[i];
    Tape t2;
    double v = t2.scalar_value(t2.matmul(t2.input(seq[static_cast<size_t>(i)]), t2.param(s, "a.Wv")));
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  const double out = t.value(r.out)[0];
  CHECK(out >= vmin - 1e-12);
  CHECK(out <= vmax + 1e-12);
}

TEST_CASE("attention gradcheck") {
  Rng rng(derive_seed(11, "attn-grad"));
  ParameterStore s;
  TargetAttention attn(s, "a", 3, 4, 3, rng);
  Tensor target = random_tensor(rng, 2, 3);
  std::vector<Tensor> seq = {random_tensor(rng, 2, 4), random_tensor(rng, 2, 4)};

  auto fn = [&](Tape& t, ParameterStore& store) {
    std::vector<Value> xs = {t.input(seq[0]), t.input(seq[1])};
    auto r = attn.forward(t, store, t.input(target), xs);
    return t.mean_all(r.out);
  };
  auto res = testutil::gradcheck(s, fn);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("mmoe equal experts ignore the gate") {
  Rng rng(derive_seed(12, "mmoe-eq"));
  ParameterStore s;
  Mmoe mmoe(s, "mm", 4, 3, 2, {5, 4}, {{{3, 1}, Mlp::Out::sigmoid}, {{3, 1}, Mlp::Out::sigmoid}},
            rng);
  // Copy expert0 into expert1.
  for (const char* suffix : {".W0", ".b0", ".W1", ".b1"}) {
    s.get(std::string("mm.expert1") + suffix) = s.get(std::string("mm.expert0") + suffix);
  }
  Tensor x = random_tensor(rng, 1, 4);
  Tape t;
  Value xv = t.input(x);
  auto r1 = mmoe.forward(t, s, xv, t.input(Tensor::row({1, 0, 0})));
  auto r2 = mmoe.forward(t, s, xv, t.input(Tensor::row({-2, 5, 1})));
  for (size_t task = 0; task < 2; ++task) {
    CHECK(t.value(r1.tasks[task])[0] ==
          doctest::Approx(t.value(r2.tasks[task])[0]).epsilon(1e-12));
  }
}

TEST_CASE("mmoe one-hot gate selects a single expert") {
  Rng rng(derive_seed(13, "mmoe-hot"));
  ParameterStore s;
  Mmoe mmoe(s, "mm", 4, 2, 2, {5, 4}, {{{1}, Mlp::Out::linear}}, rng);
  // Saturate the gate toward expert 1: logits fixed at [-30, +30].
  Tensor& gw = s.get("mm.gate0.W");
  for (int64_t i = 0; i < gw.size(); ++i) gw[i] = 0.0;
  s.get("mm.gate0.b") = Tensor::row({-30.0, 30.0});

  Tensor x = random_tensor(rng, 1, 4);
  Tape t;
  auto r = mmoe.forward(t, s, t.input(x), t.input(Tensor::row({0.3, -0.4})));

  std::vector<double> xv(4);
  for (int i = 0; i < 4; ++i) xv[static_cast<size_t>(i)] = x[i];
  auto e1 = ref_mlp(s, "mm.expert1", xv, 2, "relu");
  auto tower = ref_mlp(s, "mm.tower0", e1, 1, "linear");
  CHECK(t.value(r.tasks[0])[0] == doctest::Approx(tower[0]).epsilon(1e-12));
}

TEST_CASE("mmoe two-expert two-task brute force oracle") {
  Rng rng(derive_seed(14, "mmoe-hand"));
  ParameterStore s;
  Mmoe mmoe(s, "mm", 3, 2, 2, {4}, {{{1}, Mlp::Out::sigmoid}, {{1}, Mlp::Out::linear}}, rng);

  const std::vector<double> x = {0.5, -1.0, 0.25};
  const std::vector<double> gin = {0.8, -0.2};

  auto e0 = ref_mlp(s, "mm.expert0", x, 1, "relu");
  auto e1 = ref_mlp(s, "mm.expert1", x, 1, "relu");

  std::vector<std::vector<double>> task_out;
  for (int task = 0; task < 2; ++task) {
    const Tensor& gw = s.get("mm.gate" + std::to_string(task) + ".W");
    const Tensor& gb = s.get("mm.gate" + std::to_string(task) + ".b");
    double l0 = gb[0], l1 = gb[1];
    for (int i = 0; i < 2; ++i) {
      l0 += gin[static_cast<size_t>(i)] * gw.at(i, 0);
      l1 += gin[static_cast<size_t>(i)] * gw.at(i, 1);
    }
    const double mx = std::max(l0, l1);
    const double w0 = std::exp(l0 - mx) / (std::exp(l0 - mx) + std::exp(l1 - mx));
    std::vector<double> fused(4);
    for (size_t i = 0; i < 4; ++i) {
      fused[i] = w0 * e0[i] + (1 - w0) * e1[i];
      fused[i] = fused[i] > 0 ? fused[i] : 0;
    }
    task_out.push_back(
        ref_mlp(s, "mm.tower" + std::to_string(task), fused, 1, task == 0 ? "sigmoid" : "linear"));
  }

  Tape t;
  auto r = mmoe.forward(t, s, t.input(Tensor::row(x)), t.input(Tensor::row(gin)));
  CHECK(std::abs(t.value(r.tasks[0])[0] - task_out[0][0]) < 1e-12);
  CHECK(std::abs(t.value(r.tasks[1])[0] - task_out[1][0]) < 1e-12);

  for (int task = 0; task < 2; ++task) {
    const Tensor& g = t.value(r.gates[static_cast<size_t>(task)]);
    double sum = 0.0;
    for (int64_t i = 0; i < g.size(); ++i) {
      CHECK(g[i] >= 0.0);
      sum += g[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("mmoe gradcheck") {
  Rng rng(derive_seed(15, "mmoe-grad"));
  ParameterStore s;
  Mmoe mmoe(s, "mm", 3, 2, 2, {4}, {{{1}, Mlp::Out::sigmoid}, {{1}, Mlp::Out::softplus}}, rng);
  Tensor x = random_tensor(rng, 3, 3);
  Tensor gin = random_tensor(rng, 3, 2);
  Tensor labels(3, 1);
  labels[0] = 1.0;

  auto fn = [&](Tape& t, ParameterStore& store) {
    auto r = mmoe.forward(t, store, t.input(x), t.input(gin));
    Value l1 = bce_loss(t, r.tasks[0], labels);
    Value l2 = mse_loss(t, r.tasks[1], labels);
    return t.add(l1, l2);
  };
  auto res = testutil::gradcheck(s, fn);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("smmoe scene isolation is bit exact") {
  Rng rng(derive_seed(16, "smmoe-iso"));
  ParameterStore s;
  Smmoe sm(s, "sm", 4, 2, 2, {5}, {{{1}, Mlp::Out::sigmoid}, {{1}, Mlp::Out::sigmoid}}, rng);

  Tensor x = random_tensor(rng, 3, 4);
  Tensor gin = random_tensor(rng, 3, 2);

  auto run_android = [&]() {
    Tape t;
    auto r = sm.forward(t, s, t.input(x), t.input(gin), Scene::android);
    std::vector<double> out;
    for (Value v : r.tasks) {
      const Tensor& tv = t.value(v);
      for (int64_t i = 0; i < tv.size(); ++i) out.push_back(tv[i]);
    }
    return out;
  };

  const auto before = run_android();
  Tensor& ios_w = s.get("sm.scene_ios.W0");
  for (int64_t i = 0; i < ios_w.size(); ++i) ios_w[i] += 123.456;
  const auto after = run_android();
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) {
    CHECK(std::memcmp(&before[i], &after[i], sizeof(double)) == 0);
  }
}

TEST_CASE("smmoe inactive scene expert gets exactly zero gradient") {
  Rng rng(derive_seed(17, "smmoe-grad0"));
  ParameterStore s;
  Smmoe sm(s, "sm", 4, 2, 1, {5}, {{{1}, Mlp::Out::sigmoid}}, rng);

  Tensor x = random_tensor(rng, 4, 4);
  Tensor gin = random_tensor(rng, 4, 2);
  Tensor labels(4, 1);
  labels[0] = labels[2] = 1.0;

  Tape t;
  auto r = sm.forward(t, s, t.input(x), t.input(gin), Scene::android);
  GradientMap g = t.backward(bce_loss(t, r.tasks[0], labels));

  for (const auto& [name, grad] : g) {
    if (name.rfind("sm.scene_ios", 0) == 0) {
      for (int64_t i = 0; i < grad.size(); ++i) CHECK(grad[i] == 0.0);
    }
  }
  // The active side must actually be training.
  double android_abs = 0.0;
  for (int64_t i = 0; i < g.at("sm.scene_android.W0").size(); ++i) {
    android_abs += std::abs(g.at("sm.scene_android.W0")[i]);
  }
  CHECK(android_abs > 0.0);
}

TEST_CASE("smmoe one-hot gate on the scene expert") {
  Rng rng(derive_seed(18, "smmoe-hot"));
  ParameterStore s;
  Smmoe sm(s, "sm", 3, 2, 1, {4}, {{{1}, Mlp::Out::linear}}, rng);
  // Pool columns: [shared0, android, ios]. Saturate toward the scene expert.
  Tensor& gw = s.get("sm.gate0.W");
  for (int64_t i = 0; i < gw.size(); ++i) gw[i] = 0.0;
  s.get("sm.gate0.b") = Tensor::row({-30.0, 30.0, 30.0});

  Tensor x = random_tensor(rng, 1, 3);
  std::vector<double> xv(3);
  for (int i = 0; i < 3; ++i) xv[static_cast<size_t>(i)] = x[i];

  for (Scene scene : {Scene::android, Scene::ios}) {
    Tape t;
    auto r = sm.forward(t, s, t.input(x), t.input(Tensor::row({0.1, 0.9})), scene);
    auto e = ref_mlp(s, std::string("sm.scene_") + scene_name(scene), xv, 1, "relu");
    auto tower = ref_mlp(s, "sm.tower0", e, 1, "linear");
    CHECK(t.value(r.tasks[0])[0] == doctest::Approx(tower[0]).epsilon(1e-12));
    const Tensor& gates = t.value(r.gates[0]);
    CHECK(gates.cols() == 2);
    CHECK(gates[0] + gates[1] == doctest::Approx(1.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(scene_from_int(2), Error);
  CHECK(scene_from_int(0) == Scene::android);
  CHECK(scene_from_int(1) == Scene::ios);
}

TEST_CASE("smmoe gradcheck both scenes") {
  Rng rng(derive_seed(19, "smmoe-grad"));
  ParameterStore s;
  Smmoe sm(s, "sm", 3, 2, 2, {4}, {{{1}, Mlp::Out::sigmoid}, {{1}, Mlp::Out::sigmoid}}, rng);
  Tensor xa = random_tensor(rng, 2, 3);
  Tensor xi = random_tensor(rng, 2, 3);
  Tensor gin = random_tensor(rng, 2, 2);
  Tensor labels(2, 1);
  labels[1] = 1.0;

  auto fn = [&](Tape& t, ParameterStore& store) {
    auto ra = sm.forward(t, store, t.input(xa), t.input(gin), Scene::android);
    auto ri = sm.forward(t, store, t.input(xi), t.input(gin), Scene::ios);
    return t.add(bce_loss(t, ra.tasks[0], labels), bce_loss(t, ri.tasks[1], labels));
  };
  auto res = testutil::gradcheck(s, fn);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("embedding lookup and oov") {
  Rng rng(derive_seed(20, "emb"));
  ParameterStore s;
  EmbeddingTable table(s, "emb.item", 10, 4, rng);

  Tape t;
  const Tensor& rows = t.value(table.lookup(t, s, {3, 42, -1, 0}));
  const Tensor& raw = s.get("emb.item");
  for (int64_t c = 0; c < 4; ++c) {
    CHECK(rows.at(0, c) == raw.at(3, c));
    CHECK(rows.at(1, c) == raw.at(0, c));  // oov high
    CHECK(rows.at(2, c) == raw.at(0, c));  // oov negative
    CHECK(rows.at(3, c) == raw.at(0, c));
  }
  CHECK(table.param_count() == 40);
}

TEST_CASE("embedding gradient accumulates over repeated ids") {
  Rng rng(derive_seed(21, "emb-grad"));
  ParameterStore s;
  EmbeddingTable table(s, "emb", 5, 3, rng);

  Tape t;
  Value rows = table.lookup(t, s, {2, 2, 4});
  GradientMap g = t.backward(t.mean_all(rows));
  const Tensor& ge = g.at("emb");
  // mean over 9 entries: d/dx = 1/9 per touched cell; row 2 twice.
  for (int64_t c = 0; c < 3; ++c) {
    CHECK(ge.at(2, c) == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
    CHECK(ge.at(4, c) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(ge.at(0, c) == 0.0);
  }
}

TEST_CASE("apply_checkpoint transfers weights between stores") {
  Rng r1(derive_seed(22, "ckpt-a"));
  Rng r2(derive_seed(23, "ckpt-b"));
  ParameterStore a, b;
  Mlp ma(a, "m", {3, 4, 1}, Mlp::Out::sigmoid, r1);
  Mlp mb(b, "m", {3, 4, 1}, Mlp::Out::sigmoid, r2);

  Tensor x = Tensor::row({0.5, -0.5, 1.0});
  Tape ta, tb;
  const double before_a = ta.scalar_value(ma.forward(ta, a, ta.input(x)));
  const double before_b = tb.scalar_value(mb.forward(tb, b, tb.input(x)));
  CHECK(before_a != before_b);

  apply_checkpoint(b, a);
  Tape tb2;
  CHECK(tb2.scalar_value(mb.forward(tb2, b, tb2.input(x))) == before_a);

  ParameterStore c;
  Rng r3(derive_seed(24, "ckpt-c"));
  Mlp mc(c, "m", {3, 5, 1}, Mlp::Out::sigmoid, r3);
  CHECK_THROWS_AS(apply_checkpoint(c, a), Error);
}
