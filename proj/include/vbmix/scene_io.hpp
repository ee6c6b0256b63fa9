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

#ifndef VBMIX__SCENE_IO_HPP_
#define VBMIX__SCENE_IO_HPP_

// Scene files are line-delimited JSON. Line 1 is the header record
//
//   {"format":"vbmix.scenes","version":1,"H":8,"T":12,"step_seconds":0.25,"count":N}
//
// followed by exactly `count` scene records, one per line:
//
//   {"scene_id":..., "meta":{"geometry":..., "ood":...},
//    "target":{"agent_id":..., "n_states":H, "states":[[x,y,heading,vx,vy],...]},
//    "n_neighbors":n, "neighbors":[<track>...],
//    "n_polylines":p, "map":[{"n_vectors":k, "vectors":[[hx,hy,tx,ty],...]}...],
//    "future":{"n_points":T, "points":[[x,y],...]} | null}
//
// Every list carries its length explicitly; loaders check each count.

#include "vbmix/scene.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vbmix
{

struct SceneFileHeader
{
  int history = 0;  // H
  int future = 0;   // T
  double step_seconds = 0.0;

  Horizons horizons() const { return {history, future}; }
};

struct SceneFile
{
  SceneFileHeader header;
  std::vector<Scene> scenes;
};

inline constexpr const char * kSceneFormat = "vbmix.scenes";
inline constexpr int kSceneFormatVersion = 1;

/// Parses and validates every record. Throws Error(kParse) with the line
/// number on malformed input, Error(kInvalidInput) naming the field on an
/// invariant violation, and Error(kIo) if the file cannot be read.
SceneFile load_scene_file(const std::filesystem::path & path);
SceneFile parse_scene_file(const std::string & text, const std::string & origin = "<memory>");

void save_scene_file(const std::filesystem::path & path, const SceneFile & file);
std::string format_scene_file(const SceneFile & file);

}  // namespace vbmix

#endif  // VBMIX__SCENE_IO_HPP_
