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

#include "edgesim/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace edgesim {
namespace {

constexpr char kMagic[] = "PPKT1";
constexpr size_t kMagicLen = 5;
constexpr uint64_t kMaxDim = 1ull << 32;

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(out, bits);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  const std::string& path;

  void need(size_t n) const {
    if (pos + n > buf.size()) fail("corrupt_data", "truncated checkpoint " + path);
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const ParameterStore& params) {
  std::string out;
  out.append(kMagic, kMagicLen);
  for (const auto& [name, t] : params.entries()) {
    put_u64(out, name.size());
    out.append(name);
    put_u64(out, 2);
    put_u64(out, static_cast<uint64_t>(t.rows()));
    put_u64(out, static_cast<uint64_t>(t.cols()));
    for (int64_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail("io_error", "cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail("io_error", "short write to checkpoint: " + path);
}

ParameterStore load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    fail("missing_checkpoint", "no checkpoint at " + path);
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("io_error", "cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf, 0, path};
  if (buf.size() < kMagicLen || buf.compare(0, kMagicLen, kMagic) != 0) {
    fail("corrupt_data", "bad checkpoint magic in " + path);
  }
  r.pos = kMagicLen;

  ParameterStore store;
  std::string prev_name;
  while (r.pos < buf.size()) {
    const uint64_t name_len = r.u64();
    if (name_len == 0 || name_len > 4096) {
      fail("corrupt_data", "bad parameter name length in " + path);
    }
    const std::string name = r.bytes(name_len);
    if (!prev_name.empty() && !(prev_name < name)) {
      fail("corrupt_data", "parameter names out of order in " + path);
    }
    prev_name = name;
    const uint64_t rank = r.u64();
    if (rank != 2) fail("corrupt_data", "unexpected tensor rank in " + path);
    const uint64_t rows = r.u64();
    const uint64_t cols = r.u64();
    if (rows >= kMaxDim || cols >= kMaxDim) {
      fail("corrupt_data", "absurd tensor dims in " + path);
    }
    Tensor t(static_cast<int64_t>(rows), static_cast<int64_t>(cols));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = r.f64();
    if (!t.all_finite()) {
      fail("corrupt_data", "non-finite values for parameter '" + name + "' in " + path);
    }
    store.create(name, std::move(t));
  }
  return store;
}

}  // namespace edgesim
