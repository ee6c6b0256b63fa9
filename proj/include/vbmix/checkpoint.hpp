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

#ifndef VBMIX__CHECKPOINT_HPP_
#define VBMIX__CHECKPOINT_HPP_

// Checkpoint layout (all integers and reals little-endian):
//
//   8 bytes   magic "VBMIXCKP"
//   u32       format version (kCheckpointVersion)
//   u64       length n of the JSON header, then n bytes of JSON:
//             {"encoder":{...},"mixture":{...},"init_seed":s,
//              "n_params":P,"has_state":b}
//   P times   u32 name length, name bytes, u64 rows, u64 cols,
//             rows*cols f64 values in column-major order
//   if has_state:
//             i64 completed epochs, i64 optimizer steps,
//             P first-moment arrays then P second-moment arrays
//             (values only; shapes follow the parameters)

#include "vbmix/mixture.hpp"
#include "vbmix/training.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace vbmix
{

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint
{
  Model model;
  std::optional<TrainState> state;
};

std::string encode_checkpoint(const Model & model, const TrainState * state = nullptr);
/// Throws Error(kParse) on a malformed or version-mismatched checkpoint.
Checkpoint decode_checkpoint(const std::string & bytes);

void save_checkpoint(
  const std::filesystem::path & path, const Model & model, const TrainState * state = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path & path);

/// Configuration records shared by checkpoints and run echoes.
std::string model_config_json(const ModelConfig & config);
ModelConfig model_config_from_json(const std::string & text);

}  // namespace vbmix

#endif  // VBMIX__CHECKPOINT_HPP_
