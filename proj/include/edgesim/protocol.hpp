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
#include <string>
#include <vector>

#include "edgesim/features.hpp"

namespace edgesim {

class CloudServer;

// ---------------------------------------------------------------------------
// Edge-cloud messages. One JSON object per line on the wire:
//
//   {"type":"paging_request","session":S,"page":P,"trigger":T,"wall_minutes":W}
//   {"type":"page_response","session":S,"page":P,"items":[{"id","cate","info",
//    "p_ctr","p_cvr"}, ...]}
//   {"type":"log_upload","log":<session log object>}
//
// Doubles are written with shortest round-trip formatting, so a message
// survives serialize/parse bit-exactly.
// ---------------------------------------------------------------------------

struct PagingRequest {
  int64_t session_id = 0;
  int32_t page_index = 0;
  Trigger trigger = Trigger::manual;
  double wall_minutes = 0.0;  // offset into the simulated horizon
};

struct PageResponse {
  int64_t session_id = 0;
  int32_t page_index = 0;
  std::vector<ItemFeatures> items;  // empty: nothing left to serve
};

struct LogUpload {
  SessionLog log;
};

enum class MessageKind : int { paging_request = 0, page_response = 1, log_upload = 2 };

struct ProtocolMessage {
  MessageKind kind = MessageKind::paging_request;
  PagingRequest request;
  PageResponse response;
  LogUpload upload;
};

std::string to_line(const PagingRequest& req);
std::string to_line(const PageResponse& resp);
std::string to_line(const LogUpload& upload);

// Throws corrupt_data on malformed JSON, protocol_violation on an unknown
// message type.
ProtocolMessage parse_line(const std::string& line);

// ---------------------------------------------------------------------------
// Transports. The device talks to the cloud through this seam; the in-process
// call is the default, and the line transport pushes every message through
// the wire format both ways, standing in for a socket.
// ---------------------------------------------------------------------------

class Transport {
 public:
  virtual ~Transport() = default;
  virtual PageResponse fetch(const PagingRequest& req) = 0;
  virtual void upload(const LogUpload& upload) = 0;
};

class DirectTransport : public Transport {
 public:
  explicit DirectTransport(CloudServer& server) : server_(server) {}
  PageResponse fetch(const PagingRequest& req) override;
  void upload(const LogUpload& upload) override;

 private:
  CloudServer& server_;
};

class LineTransport : public Transport {
 public:
  explicit LineTransport(CloudServer& server) : server_(server) {}
  PageResponse fetch(const PagingRequest& req) override;
  void upload(const LogUpload& upload) override;

 private:
  CloudServer& server_;
};

// ---------------------------------------------------------------------------
// Request-rate meter. Wall-clock minutes fold into [0, horizon) and fall into
// fixed-width bins; merging meters is a plain per-bin sum, so any merge order
// gives the same curve.
// ---------------------------------------------------------------------------

class QpsMeter {
 public:
  QpsMeter(double horizon_minutes, double bin_minutes);

  void add(double wall_minutes, Trigger trigger);
  void merge(const QpsMeter& other);  // bin layout must match

  int n_bins() const { return static_cast<int>(manual_.size()); }
  double bin_minutes() const { return bin_minutes_; }
  double horizon_minutes() const { return horizon_minutes_; }
  int64_t manual_at(int bin) const;
  int64_t auto_at(int bin) const;
  int64_t total_at(int bin) const { return manual_at(bin) + auto_at(bin); }
  int64_t total_manual() const;
  int64_t total_auto() const;
  int64_t total() const { return total_manual() + total_auto(); }

 private:
  double horizon_minutes_;
  double bin_minutes_;
  std::vector<int64_t> manual_;
  std::vector<int64_t> auto_;
};

}  // namespace edgesim
