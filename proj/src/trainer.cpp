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
#include "edgesim/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "edgesim/error.hpp"
#include "edgesim/optimizer.hpp"

namespace edgesim {

namespace {

void validate_train(size_t n_samples, const TrainConfig& cfg) {
  if (n_samples == 0) fail("bad_argument", "no training samples");
  if (cfg.epochs < 1) fail("bad_config", "epochs must be positive");
  if (cfg.batch_size < 1) fail("bad_config", "batch size must be positive");
  if (!(cfg.lr >= 0) || !std::isfinite(cfg.lr)) fail("bad_config", "learning rate out of range");
}

void fill_missing(const ParameterStore& store, GradientMap& grads) {
  for (const auto& [name, p] : store.entries()) {
    if (grads.find(name) == grads.end()) grads.emplace(name, Tensor::zeros(p.rows(), p.cols()));
  }
}

void record_loss(TrainReport& report, double loss) {
  if (!std::isfinite(loss)) {
    fail("train_diverged", "non-finite loss at step " + std::to_string(report.losses.size()));
  }
  report.losses.push_back(loss);
}

void finish_report(TrainReport& report) {
  report.batches = static_cast<int64_t>(report.losses.size());
  if (report.losses.empty()) return;
  report.first_loss = report.losses.front();
  report.last_loss = report.losses.back();
  const size_t quarter = std::max<size_t>(1, report.losses.size() / 4);
  report.head_mean =
      std::accumulate(report.losses.begin(), report.losses.begin() + quarter, 0.0) / quarter;
  report.tail_mean =
      std::accumulate(report.losses.end() - quarter, report.losses.end(), 0.0) / quarter;
}

std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  return idx;
}

}  // namespace

TrainReport train_supply(SupplyModel& model, const std::vector<SupplySample>& samples,
                         const StaticsTable& statics, SupplyObjective objective,
                         const TrainConfig& cfg, const SupplyAblation& ablation) {
  validate_train(samples.size(), cfg);
  TrainReport report;
  report.samples = static_cast<int64_t>(samples.size());
  OptimizerState opt;
  Rng rng(derive_seed(cfg.seed, "train-shuffle"));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<size_t> idx = shuffled_indices(samples.size(), rng);
    for (size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      const size_t stop = std::min(idx.size(), start + cfg.batch_size);
      std::vector<const SupplySample*> batch;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) batch.push_back(&samples[idx[i]]);
      Tape t;
      const SupplyModel::Forward f = model.forward(t, batch, statics, objective, ablation);
      const Value loss = model.loss(t, f, batch, objective);
      record_loss(report, t.scalar_value(loss));
      GradientMap grads = t.backward(loss);
      fill_missing(model.store(), grads);
      adagrad_step(model.store(), grads, opt, cfg.lr, cfg.lr_decay);
    }
  }
  finish_report(report);
  return report;
}

TrainReport train_dmr(DmrModel& model, const std::vector<RankingSample>& samples,
                      const StaticsTable& statics, const TrainConfig& cfg) {
  validate_train(samples.size(), cfg);
  std::vector<size_t> android, ios;
  for (size_t i = 0; i < samples.size(); ++i) {
    (samples[i].scene == Scene::ios ? ios : android).push_back(i);
  }

  TrainReport report;
  report.samples = static_cast<int64_t>(samples.size());
  OptimizerState opt;
  Rng rng(derive_seed(cfg.seed, "train-shuffle"));
  const size_t B = static_cast<size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<size_t> order_a = shuffled_indices(android.size(), rng);
    const std::vector<size_t> order_i = shuffled_indices(ios.size(), rng);
    const size_t steps = std::max((android.size() + B - 1) / B, (ios.size() + B - 1) / B);
    for (size_t step = 0; step < steps; ++step) {
      std::vector<const RankingSample*> ba, bi;
      for (size_t i = step * B; i < std::min(android.size(), (step + 1) * B); ++i) {
        ba.push_back(&samples[android[order_a[i]]]);
      }
      for (size_t i = step * B; i < std::min(ios.size(), (step + 1) * B); ++i) {
        bi.push_back(&samples[ios[order_i[i]]]);
      }
      if (ba.empty() && bi.empty()) continue;
      Tape t;
      Value loss;
      const double n = static_cast<double>(ba.size() + bi.size());
      if (!ba.empty() && !bi.empty()) {
        const Value la = model.loss(t, model.forward(t, ba, statics, Scene::android), ba);
        const Value li = model.loss(t, model.forward(t, bi, statics, Scene::ios), bi);
        loss = t.add(t.scale(la, ba.size() / n), t.scale(li, bi.size() / n));
      } else if (!ba.empty()) {
        loss = model.loss(t, model.forward(t, ba, statics, Scene::android), ba);
      } else {
        loss = model.loss(t, model.forward(t, bi, statics, Scene::ios), bi);
      }
      record_loss(report, t.scalar_value(loss));
      GradientMap grads = t.backward(loss);
      fill_missing(model.store(), grads);
      adagrad_step(model.store(), grads, opt, cfg.lr, cfg.lr_decay);
    }
  }
  finish_report(report);
  return report;
}

TrainReport train_baseline(BaselineRanker& model, const std::vector<RankingSample>& samples,
                           const StaticsTable& statics, const TrainConfig& cfg) {
  validate_train(samples.size(), cfg);
  TrainReport report;
  report.samples = static_cast<int64_t>(samples.size());
  OptimizerState opt;
  Rng rng(derive_seed(cfg.seed, "train-shuffle"));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<size_t> idx = shuffled_indices(samples.size(), rng);
    for (size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      const size_t stop = std::min(idx.size(), start + cfg.batch_size);
      std::vector<const RankingSample*> batch;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) batch.push_back(&samples[idx[i]]);
      Tape t;
      const Value loss = model.loss(t, model.forward(t, batch, statics), batch);
      record_loss(report, t.scalar_value(loss));
      GradientMap grads = t.backward(loss);
      fill_missing(model.store(), grads);
      adagrad_step(model.store(), grads, opt, cfg.lr, cfg.lr_decay);
    }
  }
  finish_report(report);
  return report;
}

bool is_eval_user(int64_t user_id, double eval_fraction) {
  if (eval_fraction < 0 || eval_fraction > 1) fail("bad_config", "eval fraction outside [0,1]");
  const uint64_t h = derive_seed(0x5b8e1f3ull, "eval-split", static_cast<uint64_t>(user_id));
  return (h % 1000000) < static_cast<uint64_t>(eval_fraction * 1000000.0);
}

SampleSplit emit_split(const std::vector<SessionResult>& results, const EmitConfig& cfg,
                       double eval_fraction) {
  SampleSplit split;
  for (const SessionResult& r : results) {
    const bool eval = is_eval_user(r.log.user_id, eval_fraction);
    emit_training_logs(r.log, cfg, eval ? &split.supply_eval : &split.supply_train,
                       eval ? &split.ranking_eval : &split.ranking_train);
  }
  return split;
}

void write_loss_csv(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io_error", "cannot open '" + path + "' for writing");
  out << "step,loss\n";
  for (size_t i = 0; i < report.losses.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, report.losses[i]);
    out << buf;
  }
  if (!out) fail("io_error", "write failed on '" + path + "'");
}

}  // namespace edgesim
