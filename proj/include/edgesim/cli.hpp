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
#include <vector>

namespace edgesim {

// Entry point shared by the edgesim binary and in-process callers (tests run
// whole commands without spawning). Catches Error and prints
// "error=<kind>: <message>" to stderr; returns 0 on success, 1 on a domain
// error, 2 on bad usage.
int cli_main(int argc, char** argv);

// Convenience overload for in-process use: args exclude argv[0].
int cli_main(const std::vector<std::string>& args);

}  // namespace edgesim
