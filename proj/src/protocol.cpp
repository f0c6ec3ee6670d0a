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
#include "edgesim/protocol.hpp"

#include <cmath>
#include <string>

#include "edgesim/error.hpp"
#include "edgesim/world.hpp"
#include "json.hpp"

namespace edgesim {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json item_to_json(const ItemFeatures& it) {
  ordered_json j;
  j["id"] = it.item_id;
  j["cate"] = it.category_id;
  j["info"] = it.v_info;
  j["p_ctr"] = it.p_ctr;
  j["p_cvr"] = it.p_cvr;
  return j;
}

ItemFeatures item_from_json(const ordered_json& j) {
  ItemFeatures it;
  it.item_id = j.at("id").get<int32_t>();
  it.category_id = j.at("cate").get<int32_t>();
  const auto& info = j.at("info");
  if (!info.is_array() || info.size() != kStatsDim) fail("corrupt_data", "bad stats vector");
  for (int k = 0; k < kStatsDim; ++k) it.v_info[k] = info[k].get<double>();
  it.p_ctr = j.at("p_ctr").get<double>();
  it.p_cvr = j.at("p_cvr").get<double>();
  return it;
}

}  // namespace

std::string to_line(const PagingRequest& req) {
  ordered_json j;
  j["type"] = "paging_request";
  j["session"] = req.session_id;
  j["page"] = req.page_index;
  j["trigger"] = trigger_name(req.trigger);
  j["wall_minutes"] = req.wall_minutes;
  return j.dump();
}

std::string to_line(const PageResponse& resp) {
  ordered_json j;
  j["type"] = "page_response";
  j["session"] = resp.session_id;
  j["page"] = resp.page_index;
  ordered_json items = ordered_json::array();
  for (const ItemFeatures& it : resp.items) items.push_back(item_to_json(it));
  j["items"] = std::move(items);
  return j.dump();
}

std::string to_line(const LogUpload& upload) {
  ordered_json j;
  j["type"] = "log_upload";
  j["log"] = ordered_json::parse(session_log_to_json_line(upload.log));
  return j.dump();
}

ProtocolMessage parse_line(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const ordered_json::exception& e) {
    fail("corrupt_data", std::string("message parse: ") + e.what());
  }
  try {
    const std::string type = j.at("type").get<std::string>();
    ProtocolMessage msg;
    if (type == "paging_request") {
      msg.kind = MessageKind::paging_request;
      msg.request.session_id = j.at("session").get<int64_t>();
      msg.request.page_index = j.at("page").get<int32_t>();
      msg.request.trigger = trigger_from_name(j.at("trigger").get<std::string>());
      msg.request.wall_minutes = j.at("wall_minutes").get<double>();
    } else if (type == "page_response") {
      msg.kind = MessageKind::page_response;
      msg.response.session_id = j.at("session").get<int64_t>();
      msg.response.page_index = j.at("page").get<int32_t>();
      for (const auto& ij : j.at("items")) msg.response.items.push_back(item_from_json(ij));
    } else if (type == "log_upload") {
      msg.kind = MessageKind::log_upload;
      msg.upload.log = session_log_from_json_line(j.at("log").dump());
    } else {
      fail("protocol_violation", "unknown message type '" + type + "'");
    }
    return msg;
  } catch (const ordered_json::exception& e) {
    fail("corrupt_data", std::string("message parse: ") + e.what());
  }
}

PageResponse DirectTransport::fetch(const PagingRequest& req) { return server_.handle(req); }

void DirectTransport::upload(const LogUpload& upload) { server_.receive(upload); }

PageResponse LineTransport::fetch(const PagingRequest& req) {
  ProtocolMessage sent = parse_line(to_line(req));
  if (sent.kind != MessageKind::paging_request) fail("protocol_violation", "request expected");
  PageResponse resp = server_.handle(sent.request);
  ProtocolMessage back = parse_line(to_line(resp));
  if (back.kind != MessageKind::page_response) fail("protocol_violation", "response expected");
  return back.response;
}

void LineTransport::upload(const LogUpload& upload) {
  ProtocolMessage sent = parse_line(to_line(upload));
  if (sent.kind != MessageKind::log_upload) fail("protocol_violation", "log upload expected");
  server_.receive(sent.upload);
}

QpsMeter::QpsMeter(double horizon_minutes, double bin_minutes)
    : horizon_minutes_(horizon_minutes), bin_minutes_(bin_minutes) {
  if (!(horizon_minutes > 0) || !(bin_minutes > 0) || bin_minutes > horizon_minutes) {
    fail("bad_config", "qps meter needs 0 < bin <= horizon");
  }
  const int n = static_cast<int>(std::ceil(horizon_minutes / bin_minutes));
  manual_.assign(n, 0);
  auto_.assign(n, 0);
}

void QpsMeter::add(double wall_minutes, Trigger trigger) {
  if (!std::isfinite(wall_minutes)) fail("bad_argument", "non-finite wall time");
  double w = std::fmod(wall_minutes, horizon_minutes_);
  if (w < 0) w += horizon_minutes_;
  int bin = static_cast<int>(w / bin_minutes_);
  if (bin >= n_bins()) bin = n_bins() - 1;
  if (trigger == Trigger::manual) {
    ++manual_[bin];
  } else {
    ++auto_[bin];
  }
}

void QpsMeter::merge(const QpsMeter& other) {
  if (other.n_bins() != n_bins() || other.bin_minutes_ != bin_minutes_ ||
      other.horizon_minutes_ != horizon_minutes_) {
    fail("bad_argument", "qps meter bin layouts differ");
  }
  for (int i = 0; i < n_bins(); ++i) {
    manual_[i] += other.manual_[i];
    auto_[i] += other.auto_[i];
  }
}

int64_t QpsMeter::manual_at(int bin) const {
  if (bin < 0 || bin >= n_bins()) fail("bad_argument", "bin " + std::to_string(bin));
  return manual_[bin];
}

int64_t QpsMeter::auto_at(int bin) const {
  if (bin < 0 || bin >= n_bins()) fail("bad_argument", "bin " + std::to_string(bin));
  return auto_[bin];
}

int64_t QpsMeter::total_manual() const {
  int64_t n = 0;
  for (int64_t v : manual_) n += v;
  return n;
}

int64_t QpsMeter::total_auto() const {
  int64_t n = 0;
  for (int64_t v : auto_) n += v;
  return n;
}

}  // namespace edgesim
