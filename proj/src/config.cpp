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
#include "edgesim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "edgesim/error.hpp"

namespace edgesim {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail("bad_config", "key '" + key + "': bad number '" + s + "'");
  }
}

int64_t parse_int(const std::string& key, const std::string& s) {
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail("bad_config", "key '" + key + "': bad integer '" + s + "'");
  }
}

struct Field {
  std::function<std::string(const HarnessConfig&)> get;
  std::function<void(HarnessConfig&, const std::string&, const std::string&)> set;
};

using FieldMap = std::map<std::string, Field>;

void add_f64(FieldMap& m, const std::string& key, std::function<double*(HarnessConfig&)> ref) {
  m[key] = Field{
      [ref](const HarnessConfig& c) { return fmt_double(*ref(const_cast<HarnessConfig&>(c))); },
      [ref](HarnessConfig& c, const std::string& k, const std::string& v) {
        *ref(c) = parse_double(k, v);
      }};
}

void add_i64(FieldMap& m, const std::string& key, std::function<int64_t*(HarnessConfig&)> ref) {
  m[key] = Field{
      [ref](const HarnessConfig& c) {
        return std::to_string(*ref(const_cast<HarnessConfig&>(c)));
      },
      [ref](HarnessConfig& c, const std::string& k, const std::string& v) {
        *ref(c) = parse_int(k, v);
      }};
}

void add_i32(FieldMap& m, const std::string& key, std::function<int*(HarnessConfig&)> ref) {
  m[key] = Field{
      [ref](const HarnessConfig& c) {
        return std::to_string(*ref(const_cast<HarnessConfig&>(c)));
      },
      [ref](HarnessConfig& c, const std::string& k, const std::string& v) {
        *ref(c) = static_cast<int>(parse_int(k, v));
      }};
}

void add_scene(FieldMap& m, const std::string& prefix,
               std::function<SceneBehavior*(HarnessConfig&)> ref) {
  add_f64(m, prefix + ".c0", [ref](HarnessConfig& c) { return &ref(c)->c0; });
  add_f64(m, prefix + ".c1", [ref](HarnessConfig& c) { return &ref(c)->c1; });
  add_f64(m, prefix + ".pos_bias", [ref](HarnessConfig& c) { return &ref(c)->pos_bias; });
  add_f64(m, prefix + ".c2", [ref](HarnessConfig& c) { return &ref(c)->c2; });
  add_f64(m, prefix + ".c3", [ref](HarnessConfig& c) { return &ref(c)->c3; });
  add_f64(m, prefix + ".eta", [ref](HarnessConfig& c) { return &ref(c)->eta; });
}

const FieldMap& fields() {
  static const FieldMap table = [] {
    FieldMap m;
    add_i64(m, "world.n_items", [](HarnessConfig& c) { return &c.world.n_items; });
    add_i64(m, "world.n_categories", [](HarnessConfig& c) { return &c.world.n_categories; });
    add_i64(m, "world.latent_k", [](HarnessConfig& c) { return &c.world.latent_k; });
    add_i64(m, "world.page_size", [](HarnessConfig& c) { return &c.world.page_size; });
    m["world.max_pages"] = Field{
        [](const HarnessConfig& c) { return std::to_string(c.world.max_pages); },
        [](HarnessConfig& c, const std::string& k, const std::string& v) {
          c.world.max_pages = static_cast<int32_t>(parse_int(k, v));
        }};
    add_f64(m, "world.catalog_noise", [](HarnessConfig& c) { return &c.world.catalog_noise; });
    add_i64(m, "world.n_users", [](HarnessConfig& c) { return &c.world.n_users; });
    add_f64(m, "world.ios_share", [](HarnessConfig& c) { return &c.world.ios_share; });
    add_f64(m, "world.user_noise", [](HarnessConfig& c) { return &c.world.user_noise; });
    add_f64(m, "world.user_mix", [](HarnessConfig& c) { return &c.world.user_mix; });
    add_f64(m, "world.snapshot_noise", [](HarnessConfig& c) { return &c.world.snapshot_noise; });
    add_f64(m, "world.score_noise", [](HarnessConfig& c) { return &c.world.score_noise; });
    add_f64(m, "world.ctr_scale", [](HarnessConfig& c) { return &c.world.ctr_scale; });
    add_f64(m, "world.ctr_bias", [](HarnessConfig& c) { return &c.world.ctr_bias; });
    add_f64(m, "world.cvr_scale", [](HarnessConfig& c) { return &c.world.cvr_scale; });
    add_f64(m, "world.cvr_bias", [](HarnessConfig& c) { return &c.world.cvr_bias; });
    add_scene(m, "world.android", [](HarnessConfig& c) { return &c.world.android; });
    add_scene(m, "world.ios", [](HarnessConfig& c) { return &c.world.ios; });
    add_f64(m, "world.patience_min", [](HarnessConfig& c) { return &c.world.patience_min; });
    add_f64(m, "world.patience_max", [](HarnessConfig& c) { return &c.world.patience_max; });
    add_f64(m, "world.exposure_cost", [](HarnessConfig& c) { return &c.world.exposure_cost; });
    add_f64(m, "world.click_bonus", [](HarnessConfig& c) { return &c.world.click_bonus; });
    add_f64(m, "world.manual_page_cost",
            [](HarnessConfig& c) { return &c.world.manual_page_cost; });
    add_f64(m, "world.manual_page_threshold",
            [](HarnessConfig& c) { return &c.world.manual_page_threshold; });
    add_f64(m, "world.scan_seconds_min",
            [](HarnessConfig& c) { return &c.world.scan_seconds_min; });
    add_f64(m, "world.scan_seconds_max",
            [](HarnessConfig& c) { return &c.world.scan_seconds_max; });
    add_f64(m, "world.stay_log_mean", [](HarnessConfig& c) { return &c.world.stay_log_mean; });
    add_f64(m, "world.stay_log_sigma", [](HarnessConfig& c) { return &c.world.stay_log_sigma; });
    add_f64(m, "world.stay_cap_seconds",
            [](HarnessConfig& c) { return &c.world.stay_cap_seconds; });
    add_f64(m, "world.horizon_minutes",
            [](HarnessConfig& c) { return &c.world.horizon_minutes; });
    add_f64(m, "world.stress_bin_minutes",
            [](HarnessConfig& c) { return &c.world.stress_bin_minutes; });
    add_i32(m, "world.click_seq_cap", [](HarnessConfig& c) { return &c.world.click_seq_cap; });

    add_i64(m, "data.train_sessions", [](HarnessConfig& c) { return &c.train_sessions; });
    add_i64(m, "data.eval_sessions", [](HarnessConfig& c) { return &c.eval_sessions; });
    add_f64(m, "data.eval_fraction", [](HarnessConfig& c) { return &c.eval_fraction; });

    add_i32(m, "train.epochs", [](HarnessConfig& c) { return &c.train.epochs; });
    add_i64(m, "train.batch_size", [](HarnessConfig& c) { return &c.train.batch_size; });
    add_f64(m, "train.lr", [](HarnessConfig& c) { return &c.train.lr; });
    add_f64(m, "train.lr_decay", [](HarnessConfig& c) { return &c.train.lr_decay; });

    m["supply.objective"] = Field{
        [](const HarnessConfig& c) { return std::string(supply_objective_name(c.objective)); },
        [](HarnessConfig& c, const std::string&, const std::string& v) {
          c.objective = supply_objective_from_name(v);
        }};
    add_f64(m, "supply.alpha", [](HarnessConfig& c) { return &c.supply.alpha; });
    add_i32(m, "supply.checkpoint_stride",
            [](HarnessConfig& c) { return &c.supply.checkpoint_stride; });
    add_i32(m, "supply.max_auto_pages",
            [](HarnessConfig& c) { return &c.supply.max_auto_pages; });

    add_f64(m, "blend.ctr_power", [](HarnessConfig& c) { return &c.blend.a; });
    add_f64(m, "blend.ctcvr_power", [](HarnessConfig& c) { return &c.blend.b; });

    add_i32(m, "trial.seeds", [](HarnessConfig& c) { return &c.trial_seeds; });
    add_i64(m, "trial.sessions", [](HarnessConfig& c) { return &c.trial_sessions; });
    add_i64(m, "stress.sessions", [](HarnessConfig& c) { return &c.stress_sessions; });
    add_f64(m, "stress.alpha", [](HarnessConfig& c) { return &c.stress_alpha; });
    add_i32(m, "threads", [](HarnessConfig& c) { return &c.threads; });

    m["sweep.alpha_grid"] = Field{
        [](const HarnessConfig& c) {
          std::string out;
          for (size_t i = 0; i < c.alpha_grid.size(); ++i) {
            if (i) out += ',';
            out += fmt_double(c.alpha_grid[i]);
          }
          return out;
        },
        [](HarnessConfig& c, const std::string& k, const std::string& v) {
          std::vector<double> grid;
          std::stringstream ss(v);
          std::string tok;
          while (std::getline(ss, tok, ',')) grid.push_back(parse_double(k, tok));
          if (grid.empty()) fail("bad_config", "empty alpha grid");
          c.alpha_grid = std::move(grid);
        }};
    return m;
  }();
  return table;
}

}  // namespace

void apply_override(HarnessConfig& cfg, const std::string& key, const std::string& value) {
  const FieldMap& table = fields();
  auto it = table.find(key);
  if (it == table.end()) fail("bad_config", "unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

HarnessConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io_error", "cannot open config '" + path + "'");
  HarnessConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail("bad_config", path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::vector<std::pair<std::string, std::string>> dump_config(const HarnessConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, field] : fields()) out.emplace_back(key, field.get(cfg));
  return out;  // FieldMap is ordered, so keys come out sorted
}

}  // namespace edgesim
