// Copyright 2026 The vbmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VBMIX__CLI_HPP_
#define VBMIX__CLI_HPP_

#include "vbmix/error.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace vbmix::cli
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

int exit_code(ErrorKind kind);

/// Runs one command. `args` excludes the program name, e.g.
/// {"make-data", "--n", "100", "--out", "data"}. Settings are layered as
/// defaults, then --config, then SENEVA_SEED, then flags.
int run(const std::vector<std::string> & args, std::ostream & out, std::ostream & err);

}  // namespace vbmix::cli

#endif  // VBMIX__CLI_HPP_
