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

#include <string>

#include "edgesim/graph.hpp"

namespace edgesim {

// Checkpoint layout (all integers and floats little-endian):
//   magic "PPKT1"
//   per parameter, sorted by name:
//     u64 name length, name bytes, u64 rank (always 2), u64 rows, u64 cols,
//     rows*cols f64 values in row-major order.
// Writing the same store twice yields byte-identical files.
void save_checkpoint(const std::string& path, const ParameterStore& params);

// Errors: missing file -> Error("missing_checkpoint"); malformed content
// (bad magic, truncation, absurd sizes, non-finite values) ->
// Error("corrupt_data").
ParameterStore load_checkpoint(const std::string& path);

}  // namespace edgesim
