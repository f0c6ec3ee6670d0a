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

#include "edgesim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgesim/checkpoint.hpp"
#include "edgesim/config.hpp"
#include "edgesim/error.hpp"
#include "edgesim/experiments.hpp"
#include "edgesim/rng.hpp"

namespace edgesim {

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir = ".";
  uint64_t seed = 7;
  std::vector<std::string> overrides;
  int64_t sessions = 0;  // simulate only; 0 means data.eval_sessions
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

HarnessConfig resolve_config(const CliOptions& opt) {
  HarnessConfig cfg = opt.config_path.empty() ? HarnessConfig{} : load_config(opt.config_path);
  for (const auto& kv : opt.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      fail("bad_config", "--set expects key=value, got '" + kv + "'");
    }
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate_world(cfg.world);
  return cfg;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail("io_error", "cannot create output directory '" + dir + "'");
}

std::ofstream open_csv(const std::string& path, const HarnessConfig& cfg, uint64_t seed,
                       const std::string& command) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io_error", "cannot open " + path + " for writing");
  for (const auto& line : config_header_lines(cfg, seed, command)) out << line << '\n';
  return out;
}

void finish_csv(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) fail("io_error", "short write to " + path);
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

int cmd_gen_world(const CliOptions& opt) {
  HarnessConfig cfg = resolve_config(opt);
  ensure_out_dir(opt.out_dir);
  Catalog catalog = generate_catalog(cfg.world, derive_seed(opt.seed, "world"));

  std::string catalog_path = opt.out_dir + "/catalog.csv";
  {
    auto out = open_csv(catalog_path, cfg, opt.seed, "gen-world");
    out << "item_id,category_id";
    for (int64_t k = 0; k < cfg.world.latent_k; ++k) out << ",q" << k;
    for (size_t k = 0; k < kStatsDim; ++k) out << ",info" << k;
    out << '\n';
    for (const auto& item : catalog.items) {
      out << item.item_id << ',' << item.category_id;
      for (double v : item.q) out << ',' << fmt(v);
      for (double v : item.v_info) out << ',' << fmt(v);
      out << '\n';
    }
    finish_csv(out, catalog_path);
  }

  // Users are drawn lazily per session stream; this table uses the logging
  // stream seed, so it lists the population behind `simulate` and `train`.
  std::string users_path = opt.out_dir + "/users.csv";
  {
    auto out = open_csv(users_path, cfg, opt.seed, "gen-world");
    out << "user_id,scene";
    for (int64_t k = 0; k < cfg.world.latent_k; ++k) out << ",u" << k;
    out << '\n';
    uint64_t stream_seed = derive_seed(opt.seed, "log-data");
    for (int64_t id = 0; id < cfg.world.n_users; ++id) {
      LatentUser u = make_user(cfg.world, catalog, id, stream_seed);
      out << id << ',' << scene_name(u.scene);
      for (double v : u.u) out << ',' << fmt(v);
      out << '\n';
    }
    finish_csv(out, users_path);
  }

  std::printf("items=%lld\n", static_cast<long long>(cfg.world.n_items));
  std::printf("categories=%lld\n", static_cast<long long>(cfg.world.n_categories));
  std::printf("users=%lld\n", static_cast<long long>(cfg.world.n_users));
  std::printf("catalog_csv=%s\n", catalog_path.c_str());
  std::printf("users_csv=%s\n", users_path.c_str());
  return 0;
}

int cmd_simulate(const CliOptions& opt) {
  HarnessConfig cfg = resolve_config(opt);
  ensure_out_dir(opt.out_dir);
  WorldData data = build_world_shell(cfg, opt.seed);
  int64_t n = opt.sessions > 0 ? opt.sessions : cfg.eval_sessions;
  if (n <= 0) fail("bad_config", "session count must be positive");

  DevicePolicy logging;  // server order, manual paging only
  SimOptions sim;
  sim.n_sessions = n;
  sim.seed = derive_seed(opt.seed, "log-data");
  auto results = simulate_sessions(cfg.world, data.catalog, data.statics, logging, sim);

  std::string path = opt.out_dir + "/sessions.csv";
  auto out = open_csv(path, cfg, opt.seed, "simulate");
  out << "session_id,user_id,scene,exposures,clicks,orders,manual_pages,auto_pages,minutes\n";
  for (const auto& r : results) {
    out << r.metrics.session_id << ',' << r.log.user_id << ',' << scene_name(r.log.scene) << ','
        << r.metrics.exposures << ',' << r.metrics.clicks << ',' << r.metrics.orders << ','
        << r.metrics.manual_pages << ',' << r.metrics.auto_pages << ','
        << fmt(r.metrics.minutes) << '\n';
  }
  finish_csv(out, path);

  OnlineMetrics m = summarize(results);
  std::printf("sessions=%lld\n", static_cast<long long>(n));
  std::printf("exposures_per_session=%s\n", fmt(m.depth).c_str());
  std::printf("clicks_per_session=%s\n", fmt(m.clicks_per_session).c_str());
  std::printf("orders_per_session=%s\n", fmt(m.orders_per_session).c_str());
  std::printf("manual_pages_per_session=%s\n", fmt(m.manual_pages).c_str());
  std::printf("sessions_csv=%s\n", path.c_str());
  return 0;
}

void print_report(const char* name, const TrainReport& r) {
  std::printf("%s_samples=%lld\n", name, static_cast<long long>(r.samples));
  std::printf("%s_batches=%lld\n", name, static_cast<long long>(r.batches));
  std::printf("%s_first_loss=%s\n", name, fmt(r.first_loss).c_str());
  std::printf("%s_last_loss=%s\n", name, fmt(r.last_loss).c_str());
  std::printf("%s_head_mean=%s\n", name, fmt(r.head_mean).c_str());
  std::printf("%s_tail_mean=%s\n", name, fmt(r.tail_mean).c_str());
}

int cmd_train(const CliOptions& opt) {
  HarnessConfig cfg = resolve_config(opt);
  ensure_out_dir(opt.out_dir);
  WorldData data = build_world_data(cfg, opt.seed, cfg.train_sessions);
  TrainedModels models = train_models(cfg, opt.seed, data);
  save_models(opt.out_dir, models);
  write_loss_csv(opt.out_dir + "/supply_loss.csv", models.supply_report);
  write_loss_csv(opt.out_dir + "/dmr_loss.csv", models.dmr_report);
  write_loss_csv(opt.out_dir + "/baseline_loss.csv", models.baseline_report);

  std::printf("train_sessions=%lld\n", static_cast<long long>(cfg.train_sessions));
  std::printf("supply_train_rows=%zu\n", data.split.supply_train.size());
  std::printf("supply_eval_rows=%zu\n", data.split.supply_eval.size());
  std::printf("ranking_train_rows=%zu\n", data.split.ranking_train.size());
  std::printf("ranking_eval_rows=%zu\n", data.split.ranking_eval.size());
  print_report("supply", models.supply_report);
  print_report("dmr", models.dmr_report);
  print_report("baseline", models.baseline_report);
  std::printf("supply_checkpoint=%s\n", supply_checkpoint(opt.out_dir).c_str());
  std::printf("dmr_checkpoint=%s\n", dmr_checkpoint(opt.out_dir).c_str());
  std::printf("baseline_checkpoint=%s\n", baseline_checkpoint(opt.out_dir).c_str());
  return 0;
}

int cmd_eval(const CliOptions& opt) {
  HarnessConfig cfg = resolve_config(opt);
  ensure_out_dir(opt.out_dir);
  WorldData data = build_world_data(cfg, opt.seed, cfg.train_sessions);
  TrainedModels models = load_models(cfg, opt.seed, opt.out_dir);

  RankingAuc dmr = dmr_auc(*models.dmr, data.split.ranking_eval, data.statics);
  RankingAuc base = baseline_auc(*models.baseline, data.split.ranking_eval, data.statics);
  SupplyAuc sup = supply_auc(*models.supply, data.split.supply_eval, data.statics, cfg.objective);

  std::vector<MetricsRecord> rows(3);
  rows[0].experiment = rows[1].experiment = rows[2].experiment = "eval";
  rows[0].variant = "baseline";
  rows[0].ctr_auc = base.ctr;
  rows[0].ctcvr_auc = base.ctcvr;
  rows[1].variant = "dmr";
  rows[1].ctr_auc = dmr.ctr;
  rows[1].ctcvr_auc = dmr.ctcvr;
  rows[2].variant = "supply";
  rows[2].local_auc = sup.local;
  rows[2].global_auc = sup.global;
  rows[2].uplift_auc = sup.uplift;
  std::string path = opt.out_dir + "/eval.csv";
  write_metrics_csv(path, cfg, opt.seed, "eval", rows);

  std::printf("baseline_ctr_auc=%s\n", fmt(base.ctr).c_str());
  std::printf("baseline_ctcvr_auc=%s\n", fmt(base.ctcvr).c_str());
  std::printf("dmr_ctr_auc=%s\n", fmt(dmr.ctr).c_str());
  std::printf("dmr_ctcvr_auc=%s\n", fmt(dmr.ctcvr).c_str());
  std::printf("supply_local_auc=%s\n", fmt(sup.local).c_str());
  std::printf("supply_global_auc=%s\n", fmt(sup.global).c_str());
  std::printf("supply_uplift_auc=%s\n", fmt(sup.uplift).c_str());
  std::printf("eval_csv=%s\n", path.c_str());
  return 0;
}

int cmd_trial(const CliOptions& opt) {
  HarnessConfig cfg = resolve_config(opt);
  ensure_out_dir(opt.out_dir);
  WorldData data = build_world_data(cfg, opt.seed, cfg.train_sessions);
  TrainedModels models = load_models(cfg, opt.seed, opt.out_dir);
  auto rows = run_trial(cfg, opt.seed, data, models);
  std::string path = opt.out_dir + "/trial.csv";
  write_metrics_csv(path, cfg, opt.seed, "trial", rows);

  // Paired per-seed deltas: rows are variant-major, seeds in order.
  std::map<std::string, std::vector<const MetricsRecord*>> by_variant;
  for (const auto& r : rows) by_variant[r.variant].push_back(&r);
  for (const auto& [variant, group] : by_variant) {
    double mean = 0.0;
    for (const auto* r : group) mean += r->orders_per_session;
    mean /= static_cast<double>(group.size());
    std::printf("%s_mean_orders=%s\n", variant.c_str(), fmt(mean).c_str());
  }
  const auto& dmr_mr = by_variant["dmr_mr"];
  const auto& dmr_ms = by_variant["dmr_mr_ms"];
  int wins = 0;
  double delta = 0.0;
  for (size_t s = 0; s < dmr_mr.size(); ++s) {
    double d = dmr_ms[s]->orders_per_session - dmr_mr[s]->orders_per_session;
    delta += d;
    if (d >= 0.0) ++wins;
  }
  delta /= static_cast<double>(dmr_mr.size());
  std::printf("dmr_ms_wins=%d/%d\n", wins, static_cast<int>(dmr_mr.size()));
  std::printf("dmr_ms_mean_delta=%s\n", fmt(delta).c_str());
  double auc_gap = by_variant["dmr_mr"][0]->ctr_auc - by_variant["baseline_mr"][0]->ctr_auc;
  std::printf("dmr_ctr_auc_gap=%s\n", fmt(auc_gap).c_str());
  std::printf("trial_csv=%s\n", path.c_str());
  return 0;
}

int cmd_ablate(const CliOptions& opt) {
  HarnessConfig cfg = resolve_config(opt);
  ensure_out_dir(opt.out_dir);
  WorldData data = build_world_data(cfg, opt.seed, cfg.train_sessions);
  TrainedModels models = load_models(cfg, opt.seed, opt.out_dir);
  auto rows = run_ablation(cfg, opt.seed, data, models);
  std::string path = opt.out_dir + "/ablate.csv";
  write_metrics_csv(path, cfg, opt.seed, "ablate", rows);
  for (const auto& r : rows) {
    std::printf("%s_uplift_auc=%s\n", r.variant.c_str(), fmt(r.uplift_auc).c_str());
  }
  std::printf("ablate_csv=%s\n", path.c_str());
  return 0;
}

int cmd_sweep(const CliOptions& opt) {
  HarnessConfig cfg = resolve_config(opt);
  ensure_out_dir(opt.out_dir);
  WorldData data = build_world_shell(cfg, opt.seed);
  TrainedModels models = load_models(cfg, opt.seed, opt.out_dir);
  auto rows = run_sweep(cfg, opt.seed, data, models);
  std::string path = opt.out_dir + "/sweep.csv";
  write_metrics_csv(path, cfg, opt.seed, "sweep", rows);

  int64_t n_seeds = cfg.trial_seeds;
  size_t best = 0;
  double best_orders = -1.0;
  for (size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
    double mean = 0.0;
    for (int64_t s = 0; s < n_seeds; ++s) {
      mean += rows[a * static_cast<size_t>(n_seeds) + static_cast<size_t>(s)].orders_per_session;
    }
    mean /= static_cast<double>(n_seeds);
    std::printf("alpha_%s_mean_orders=%s\n", fmt(cfg.alpha_grid[a]).c_str(), fmt(mean).c_str());
    if (mean > best_orders) {
      best_orders = mean;
      best = a;
    }
  }
  std::printf("best_alpha=%s\n", fmt(cfg.alpha_grid[best]).c_str());
  std::printf("sweep_csv=%s\n", path.c_str());
  return 0;
}

int cmd_stress(const CliOptions& opt) {
  HarnessConfig cfg = resolve_config(opt);
  ensure_out_dir(opt.out_dir);
  WorldData data = build_world_shell(cfg, opt.seed);
  TrainedModels models = load_models(cfg, opt.seed, opt.out_dir);
  StressResult result = run_stress(cfg, opt.seed, data, models);
  std::string path = opt.out_dir + "/stress.csv";
  write_stress_csv(path, cfg, opt.seed, result);
  std::printf("manual_total_requests=%lld\n",
              static_cast<long long>(result.manual_curve.total()));
  std::printf("ms_total_requests=%lld\n", static_cast<long long>(result.ms_curve.total()));
  std::printf("max_rel_deviation=%s\n", fmt(result.max_rel_deviation).c_str());
  std::printf("stress_csv=%s\n", path.c_str());
  return 0;
}

int cmd_params_count(const CliOptions& opt) {
  HarnessConfig cfg = resolve_config(opt);
  FeatureSpace space = cfg.world.feature_space();
  SupplyModel supply(space, SupplyDims{}, derive_seed(opt.seed, "supply-init"));
  DmrModel dmr(space, DmrDims{}, derive_seed(opt.seed, "dmr-init"));
  BaselineRanker baseline(space, BaselineDims{}, derive_seed(opt.seed, "baseline-init"));
  std::printf("dmr=%lld\n", static_cast<long long>(dmr.param_count()));
  std::printf("supply=%lld\n", static_cast<long long>(supply.param_count()));
  std::printf("baseline=%lld\n", static_cast<long long>(baseline.param_count()));
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"deterministic cloud-edge recommender simulator"};
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--config", opt.config_path, "key=value config file");
  app.add_option("--seed", opt.seed, "master seed (default 7)");
  app.add_option("--out", opt.out_dir, "output directory (default .)");
  app.add_option("--set", opt.overrides, "config override key=value (repeatable)");

  auto* gen_world = app.add_subcommand("gen-world", "write the item catalog and user table");
  auto* simulate = app.add_subcommand("simulate", "run logging sessions, write per-session rows");
  simulate->add_option("--sessions", opt.sessions, "session count (default data.eval_sessions)");
  auto* train = app.add_subcommand("train", "simulate logs and train all three models");
  auto* eval = app.add_subcommand("eval", "offline AUC of trained models on held-out users");
  auto* trial = app.add_subcommand("trial", "ranker x paging policy grid over seeds");
  auto* ablate = app.add_subcommand("ablate", "retrain supply variants with zeroed branches");
  auto* sweep = app.add_subcommand("sweep", "online metrics across the alpha grid");
  auto* stress = app.add_subcommand("stress", "request-rate curves, auto vs manual paging");
  auto* params = app.add_subcommand("params-count", "parameter totals per model");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error=bad_argument: %s\n", e.what());
    return 2;
  }

  try {
    if (app.got_subcommand(gen_world)) return cmd_gen_world(opt);
    if (app.got_subcommand(simulate)) return cmd_simulate(opt);
    if (app.got_subcommand(train)) return cmd_train(opt);
    if (app.got_subcommand(eval)) return cmd_eval(opt);
    if (app.got_subcommand(trial)) return cmd_trial(opt);
    if (app.got_subcommand(ablate)) return cmd_ablate(opt);
    if (app.got_subcommand(sweep)) return cmd_sweep(opt);
    if (app.got_subcommand(stress)) return cmd_stress(opt);
    if (app.got_subcommand(params)) return cmd_params_count(opt);
  } catch (const Error& e) {
    std::fprintf(stderr, "error=%s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error=internal: %s\n", e.what());
    return 1;
  }
  std::fprintf(stderr, "error=bad_argument: no subcommand selected\n");
  return 2;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> storage = args;
  std::vector<char*> argv;
  std::string prog = "edgesim";
  argv.push_back(prog.data());
  for (auto& s : storage) argv.push_back(s.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace edgesim
