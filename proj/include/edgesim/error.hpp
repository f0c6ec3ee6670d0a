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

#include <stdexcept>
#include <string>

namespace edgesim {

// All failures surface as Error with a machine-parsable kind. The CLI prints
// "error=<kind>: <message>" and exits nonzero.
//
// Kinds in use:
//   shape_mismatch, bad_argument, non_finite, bad_label, bad_config,
//   io_error, corrupt_data, missing_checkpoint, protocol_violation,
//   train_diverged, degenerate_metric, unsupported_kernel
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace edgesim
