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
#include "edgesim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "edgesim/checkpoint.hpp"
#include "edgesim/error.hpp"
#include "edgesim/metrics.hpp"
#include "edgesim/rng.hpp"

namespace edgesim {

namespace {

constexpr int64_t kScoreChunk = 2048;  // bounds eval forward-pass memory

std::string fmt_cell(double v) {
  if (std::isnan(v)) return std::string();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

void append_cell(std::string& s, double v) {
  s += ',';
  s += fmt_cell(v);
}

}  // namespace

std::string metrics_header() {
  return "experiment,variant,seed,ctr_auc,ctcvr_auc,local_auc,global_auc,uplift_auc,"
         "orders_per_session,clicks_per_session,depth,manual_pages,auto_pages";
}

std::string metrics_row(const MetricsRecord& r) {
  std::string s = r.experiment;
  s += ',';
  s += r.variant;
  s += ',';
  if (r.seed >= 0) s += std::to_string(r.seed);
  append_cell(s, r.ctr_auc);
  append_cell(s, r.ctcvr_auc);
  append_cell(s, r.local_auc);
  append_cell(s, r.global_auc);
  append_cell(s, r.uplift_auc);
  append_cell(s, r.orders_per_session);
  append_cell(s, r.clicks_per_session);
  append_cell(s, r.depth);
  append_cell(s, r.manual_pages);
  append_cell(s, r.auto_pages);
  return s;
}

std::vector<std::string> config_header_lines(const HarnessConfig& cfg, uint64_t seed,
                                             const std::string& command) {
  std::vector<std::string> lines;
  lines.push_back("# command=" + command);
  lines.push_back("# seed=" + std::to_string(seed));
  for (const auto& [key, value] : dump_config(cfg)) {
    lines.push_back("# " + key + "=" + value);
  }
  return lines;
}

void write_metrics_csv(const std::string& path, const HarnessConfig& cfg, uint64_t seed,
                       const std::string& command, const std::vector<MetricsRecord>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io_error", "cannot open " + path + " for writing");
  for (const auto& line : config_header_lines(cfg, seed, command)) out << line << '\n';
  out << metrics_header() << '\n';
  for (const auto& r : rows) out << metrics_row(r) << '\n';
  out.flush();
  if (!out) fail("io_error", "short write to " + path);
}

void parallel_for(int threads, int64_t n, const std::function<void(int64_t)>& fn) {
  if (threads < 1) fail("bad_config", "threads must be positive");
  if (n <= 0) return;
  int64_t workers = std::min<int64_t>(threads, n);
  if (workers == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int64_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        int64_t i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

WorldData build_world_shell(const HarnessConfig& cfg, uint64_t seed) {
  WorldData data;
  data.catalog = generate_catalog(cfg.world, derive_seed(seed, "world"));
  data.statics = data.catalog.statics();
  return data;
}

WorldData build_world_data(const HarnessConfig& cfg, uint64_t seed, int64_t n_sessions) {
  if (n_sessions <= 0) fail("bad_config", "session count must be positive");
  WorldData data = build_world_shell(cfg, seed);
  DevicePolicy logging;  // server order, manual paging only
  SimOptions opt;
  opt.n_sessions = n_sessions;
  opt.seed = derive_seed(seed, "log-data");
  auto results = simulate_sessions(cfg.world, data.catalog, data.statics, logging, opt);
  EmitConfig emit;
  emit.objective = cfg.objective;
  emit.click_cap = cfg.world.click_seq_cap;
  emit.checkpoint_stride = cfg.supply.checkpoint_stride;
  data.split = emit_split(results, emit, cfg.eval_fraction);
  data.sessions = n_sessions;
  return data;
}

TrainedModels train_models(const HarnessConfig& cfg, uint64_t seed, const WorldData& data) {
  FeatureSpace space = cfg.world.feature_space();
  TrainedModels m;
  m.supply = std::make_unique<SupplyModel>(space, SupplyDims{}, derive_seed(seed, "supply-init"));
  m.dmr = std::make_unique<DmrModel>(space, DmrDims{}, derive_seed(seed, "dmr-init"));
  m.baseline =
      std::make_unique<BaselineRanker>(space, BaselineDims{}, derive_seed(seed, "baseline-init"));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, "supply-train");
  m.supply_report =
      train_supply(*m.supply, data.split.supply_train, data.statics, cfg.objective, tc);
  tc.seed = derive_seed(seed, "dmr-train");
  m.dmr_report = train_dmr(*m.dmr, data.split.ranking_train, data.statics, tc);
  tc.seed = derive_seed(seed, "baseline-train");
  m.baseline_report = train_baseline(*m.baseline, data.split.ranking_train, data.statics, tc);
  return m;
}

void restore_params(ParameterStore& dst, const ParameterStore& src) {
  if (dst.entries().size() != src.entries().size()) {
    fail("corrupt_data", "checkpoint parameter count does not match the model");
  }
  for (auto& [name, tensor] : dst.entries()) {
    auto it = src.entries().find(name);
    if (it == src.entries().end()) fail("corrupt_data", "checkpoint is missing " + name);
    if (it->second.rows() != tensor.rows() || it->second.cols() != tensor.cols()) {
      fail("corrupt_data", "checkpoint shape mismatch for " + name);
    }
    tensor = it->second;
  }
}

std::string supply_checkpoint(const std::string& dir) { return dir + "/supply.ckpt"; }
std::string dmr_checkpoint(const std::string& dir) { return dir + "/dmr.ckpt"; }
std::string baseline_checkpoint(const std::string& dir) { return dir + "/baseline.ckpt"; }

void save_models(const std::string& dir, const TrainedModels& models) {
  save_checkpoint(supply_checkpoint(dir), models.supply->store());
  save_checkpoint(dmr_checkpoint(dir), models.dmr->store());
  save_checkpoint(baseline_checkpoint(dir), models.baseline->store());
}

TrainedModels load_models(const HarnessConfig& cfg, uint64_t seed, const std::string& dir) {
  FeatureSpace space = cfg.world.feature_space();
  TrainedModels m;
  m.supply = std::make_unique<SupplyModel>(space, SupplyDims{}, derive_seed(seed, "supply-init"));
  m.dmr = std::make_unique<DmrModel>(space, DmrDims{}, derive_seed(seed, "dmr-init"));
  m.baseline =
      std::make_unique<BaselineRanker>(space, BaselineDims{}, derive_seed(seed, "baseline-init"));
  restore_params(m.supply->store(), load_checkpoint(supply_checkpoint(dir)));
  restore_params(m.dmr->store(), load_checkpoint(dmr_checkpoint(dir)));
  restore_params(m.baseline->store(), load_checkpoint(baseline_checkpoint(dir)));
  return m;
}

namespace {

template <typename Model>
RankingAuc ranking_auc_of(const Model& model, const std::vector<RankingSample>& rows,
                          const StaticsTable& statics) {
  if (rows.empty()) fail("bad_argument", "ranking evaluation needs at least one row");
  size_t n = rows.size();
  std::vector<double> ctr_scores(n), ctcvr_scores(n);
  std::vector<int> click_labels(n), order_labels(n);
  // Scoring batches must be scene-pure, so partition before chunking.
  for (Scene scene : {Scene::android, Scene::ios}) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < n; ++i) {
      if (rows[i].scene == scene) idx.push_back(i);
    }
    for (size_t lo = 0; lo < idx.size(); lo += kScoreChunk) {
      size_t hi = std::min(lo + static_cast<size_t>(kScoreChunk), idx.size());
      std::vector<RankingSample> chunk;
      chunk.reserve(hi - lo);
      for (size_t i = lo; i < hi; ++i) chunk.push_back(rows[idx[i]]);
      auto scored = model.score_items(chunk, statics);
      for (size_t i = lo; i < hi; ++i) {
        ctr_scores[idx[i]] = scored[i - lo].p_ctr;
        ctcvr_scores[idx[i]] = scored[i - lo].p_ctcvr;
        click_labels[idx[i]] = rows[idx[i]].click;
        order_labels[idx[i]] = rows[idx[i]].ctcvr;
      }
    }
  }
  RankingAuc out;
  out.ctr = auc(ctr_scores, click_labels);
  out.ctcvr = auc(ctcvr_scores, order_labels);
  return out;
}

}  // namespace

RankingAuc dmr_auc(const DmrModel& model, const std::vector<RankingSample>& rows,
                   const StaticsTable& statics) {
  return ranking_auc_of(model, rows, statics);
}

RankingAuc baseline_auc(const BaselineRanker& model, const std::vector<RankingSample>& rows,
                        const StaticsTable& statics) {
  return ranking_auc_of(model, rows, statics);
}

SupplyAuc supply_auc(const SupplyModel& model, const std::vector<SupplySample>& rows,
                     const StaticsTable& statics, SupplyObjective objective,
                     const SupplyAblation& ablation) {
  if (rows.empty()) fail("bad_argument", "supply evaluation needs at least one row");
  std::vector<double> local_scores, global_scores, uplift_scores;
  std::vector<int> local_labels, global_labels, uplift_labels;
  for (int64_t lo = 0; lo < static_cast<int64_t>(rows.size()); lo += kScoreChunk) {
    int64_t hi = std::min<int64_t>(lo + kScoreChunk, static_cast<int64_t>(rows.size()));
    std::vector<const SupplySample*> chunk;
    chunk.reserve(static_cast<size_t>(hi - lo));
    for (int64_t i = lo; i < hi; ++i) chunk.push_back(&rows[static_cast<size_t>(i)]);
    auto estimates = model.predict(chunk, statics, objective, ablation);
    for (int64_t i = 0; i < hi - lo; ++i) {
      const SupplySample& s = rows[static_cast<size_t>(lo + i)];
      const UpliftEstimate& e = estimates[static_cast<size_t>(i)];
      local_scores.push_back(e.v_l);
      global_scores.push_back(e.v_g);
      uplift_scores.push_back(e.u_p);
      local_labels.push_back(s.v_l);
      global_labels.push_back(s.v_g);
      uplift_labels.push_back(s.v_g == 1 && s.v_l == 0 ? 1 : 0);
    }
  }
  SupplyAuc out;
  out.local = auc(local_scores, local_labels);
  out.global = auc(global_scores, global_labels);
  out.uplift = auc(uplift_scores, uplift_labels);
  return out;
}

OnlineMetrics summarize(const std::vector<SessionResult>& results) {
  if (results.empty()) fail("bad_argument", "cannot summarize zero sessions");
  OnlineMetrics m;
  for (const auto& r : results) {
    m.orders_per_session += r.metrics.orders;
    m.clicks_per_session += r.metrics.clicks;
    m.depth += r.metrics.exposures;
    m.manual_pages += r.metrics.manual_pages;
    m.auto_pages += r.metrics.auto_pages;
  }
  double n = static_cast<double>(results.size());
  m.orders_per_session /= n;
  m.clicks_per_session /= n;
  m.depth /= n;
  m.manual_pages /= n;
  m.auto_pages /= n;
  return m;
}

namespace {

struct TrialCell {
  const char* variant;
  RankerKind ranker;
  bool supply;
};

MetricsRecord online_record(const std::string& experiment, const std::string& variant,
                            int64_t seed_index, const OnlineMetrics& m) {
  MetricsRecord r;
  r.experiment = experiment;
  r.variant = variant;
  r.seed = seed_index;
  r.orders_per_session = m.orders_per_session;
  r.clicks_per_session = m.clicks_per_session;
  r.depth = m.depth;
  r.manual_pages = m.manual_pages;
  r.auto_pages = m.auto_pages;
  return r;
}

DevicePolicy make_policy(const HarnessConfig& cfg, const TrainedModels& models, RankerKind ranker,
                         bool supply, double alpha) {
  DevicePolicy pol;
  pol.ranker = ranker;
  pol.dmr = models.dmr.get();
  pol.baseline = models.baseline.get();
  pol.blend = cfg.blend;
  pol.supply = supply;
  pol.supply_model = models.supply.get();
  pol.supply_cfg = cfg.supply;
  pol.supply_cfg.objective = cfg.objective;
  pol.supply_cfg.alpha = alpha;
  return pol;
}

}  // namespace

std::vector<MetricsRecord> run_trial(const HarnessConfig& cfg, uint64_t seed,
                                     const WorldData& data, const TrainedModels& models) {
  if (cfg.trial_seeds < 1) fail("bad_config", "trial needs at least one seed");
  if (cfg.trial_sessions < 1) fail("bad_config", "trial needs at least one session");
  RankingAuc base = baseline_auc(*models.baseline, data.split.ranking_eval, data.statics);
  RankingAuc dmr = dmr_auc(*models.dmr, data.split.ranking_eval, data.statics);

  const TrialCell cells[] = {
      {"baseline_mr", RankerKind::baseline, false},
      {"baseline_mr_ms", RankerKind::baseline, true},
      {"dmr_mr", RankerKind::dmr, false},
      {"dmr_mr_ms", RankerKind::dmr, true},
  };
  int64_t n_seeds = cfg.trial_seeds;
  std::vector<MetricsRecord> rows(static_cast<size_t>(4 * n_seeds));
  parallel_for(cfg.threads, 4 * n_seeds, [&](int64_t idx) {
    const TrialCell& cell = cells[idx / n_seeds];
    int64_t s = idx % n_seeds;
    DevicePolicy pol = make_policy(cfg, models, cell.ranker, cell.supply, cfg.supply.alpha);
    SimOptions opt;
    opt.n_sessions = cfg.trial_sessions;
    opt.seed = derive_seed(seed, "trial-online", static_cast<uint64_t>(s));
    auto results = simulate_sessions(cfg.world, data.catalog, data.statics, pol, opt);
    MetricsRecord r = online_record("trial", cell.variant, s, summarize(results));
    const RankingAuc& offline = cell.ranker == RankerKind::dmr ? dmr : base;
    r.ctr_auc = offline.ctr;
    r.ctcvr_auc = offline.ctcvr;
    rows[static_cast<size_t>(idx)] = r;
  });
  return rows;
}

std::vector<MetricsRecord> run_ablation(const HarnessConfig& cfg, uint64_t seed,
                                        const WorldData& data, const TrainedModels& models) {
  struct Variant {
    const char* name;
    SupplyAblation ablation;
  };
  const Variant variants[] = {
      {"full", SupplyAblation{}},
      {"no_cie", SupplyAblation{false, true}},
      {"no_rie", SupplyAblation{true, false}},
  };
  FeatureSpace space = cfg.world.feature_space();
  std::vector<MetricsRecord> rows(3);
  parallel_for(cfg.threads, 3, [&](int64_t i) {
    const Variant& v = variants[i];
    SupplyAuc a;
    if (i == 0) {
      // The shipped supply model was trained with every branch live from
      // the same init and shuffle seeds, so it is the full variant.
      a = supply_auc(*models.supply, data.split.supply_eval, data.statics, cfg.objective,
                     v.ablation);
    } else {
      SupplyModel model(space, SupplyDims{}, derive_seed(seed, "supply-init"));
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(seed, "supply-train");
      train_supply(model, data.split.supply_train, data.statics, cfg.objective, tc, v.ablation);
      a = supply_auc(model, data.split.supply_eval, data.statics, cfg.objective, v.ablation);
    }
    MetricsRecord r;
    r.experiment = "ablate";
    r.variant = v.name;
    r.local_auc = a.local;
    r.global_auc = a.global;
    r.uplift_auc = a.uplift;
    rows[static_cast<size_t>(i)] = r;
  });
  return rows;
}

std::vector<MetricsRecord> run_sweep(const HarnessConfig& cfg, uint64_t seed,
                                     const WorldData& data, const TrainedModels& models) {
  if (cfg.alpha_grid.empty()) fail("bad_config", "sweep.alpha_grid is empty");
  for (size_t i = 0; i < cfg.alpha_grid.size(); ++i) {
    if (!(cfg.alpha_grid[i] >= 0.0)) fail("bad_config", "sweep alpha must be >= 0");
    if (i > 0 && !(cfg.alpha_grid[i] > cfg.alpha_grid[i - 1])) {
      fail("bad_config", "sweep.alpha_grid must be strictly ascending");
    }
  }
  if (cfg.trial_seeds < 1) fail("bad_config", "sweep needs at least one seed");

  int64_t n_seeds = cfg.trial_seeds;
  int64_t n_alpha = static_cast<int64_t>(cfg.alpha_grid.size());
  // Every cell of one seed replays the same session stream, so columns are
  // paired across alphas; at alpha 0 the trigger never fires and the row
  // matches a supply-off run of the same stream bit for bit.
  std::vector<MetricsRecord> rows(static_cast<size_t>(n_alpha * n_seeds));
  parallel_for(cfg.threads, n_alpha * n_seeds, [&](int64_t idx) {
    int64_t cell = idx / n_seeds;
    int64_t s = idx % n_seeds;
    double alpha = cfg.alpha_grid[static_cast<size_t>(cell)];
    DevicePolicy pol = make_policy(cfg, models, RankerKind::dmr, true, alpha);
    SimOptions opt;
    opt.n_sessions = cfg.trial_sessions;
    opt.seed = derive_seed(seed, "sweep-online", static_cast<uint64_t>(s));
    auto results = simulate_sessions(cfg.world, data.catalog, data.statics, pol, opt);
    rows[static_cast<size_t>(idx)] =
        online_record("sweep", "alpha_" + fmt_cell(alpha), s, summarize(results));
  });
  return rows;
}

StressResult run_stress(const HarnessConfig& cfg, uint64_t seed, const WorldData& data,
                        const TrainedModels& models) {
  if (cfg.stress_sessions < 1) fail("bad_config", "stress needs at least one session");
  SimOptions opt;
  opt.n_sessions = cfg.stress_sessions;
  opt.seed = derive_seed(seed, "stress-online");

  // Reference arm: server order, user-driven paging only. Paging arm: same
  // session stream, manual paging disabled past the first page, the supply
  // model alone decides every further fetch.
  DevicePolicy manual;
  DevicePolicy paged = make_policy(cfg, models, RankerKind::server, true, cfg.stress_alpha);
  paged.manual_paging = false;

  std::vector<std::vector<SessionResult>> arms(2);
  parallel_for(std::min(cfg.threads, 2), 2, [&](int64_t i) {
    arms[static_cast<size_t>(i)] = simulate_sessions(
        cfg.world, data.catalog, data.statics, i == 0 ? manual : paged, opt);
  });

  double horizon = cfg.world.horizon_minutes;
  double bin = cfg.world.stress_bin_minutes;
  StressResult result{stress_curve(arms[0], horizon, bin), stress_curve(arms[1], horizon, bin),
                      0.0};
  for (int i = 0; i < result.manual_curve.n_bins(); ++i) {
    double m = static_cast<double>(result.manual_curve.total_at(i));
    double x = static_cast<double>(result.ms_curve.total_at(i));
    double rel = m > 0.0 ? std::abs(x - m) / m
                         : (x > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    result.max_rel_deviation = std::max(result.max_rel_deviation, rel);
  }
  return result;
}

void write_stress_csv(const std::string& path, const HarnessConfig& cfg, uint64_t seed,
                      const StressResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io_error", "cannot open " + path + " for writing");
  for (const auto& line : config_header_lines(cfg, seed, "stress")) out << line << '\n';
  out << "# max_rel_deviation=" << fmt_cell(result.max_rel_deviation) << '\n';
  out << "bin,start_minutes,manual_total,manual_manual,manual_auto,ms_total,ms_manual,ms_auto,"
         "rel_deviation\n";
  const QpsMeter& a = result.manual_curve;
  const QpsMeter& b = result.ms_curve;
  for (int i = 0; i < a.n_bins(); ++i) {
    double m = static_cast<double>(a.total_at(i));
    double x = static_cast<double>(b.total_at(i));
    double rel = m > 0.0 ? std::abs(x - m) / m : (x > 0.0 ? std::numeric_limits<double>::infinity()
                                                          : 0.0);
    out << i << ',' << fmt_cell(static_cast<double>(i) * cfg.world.stress_bin_minutes) << ','
        << fmt_cell(m) << ',' << fmt_cell(a.manual_at(i)) << ',' << fmt_cell(a.auto_at(i)) << ','
        << fmt_cell(x) << ',' << fmt_cell(b.manual_at(i)) << ',' << fmt_cell(b.auto_at(i)) << ','
        << fmt_cell(rel) << '\n';
  }
  out.flush();
  if (!out) fail("io_error", "short write to " + path);
}

}  // namespace edgesim
