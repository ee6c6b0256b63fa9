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

#ifndef VBMIX__SYNTHETIC_HPP_
#define VBMIX__SYNTHETIC_HPP_

// Deterministic multimodal toy scenes.
//
// In the local frame every target approaches the origin along +x at constant
// speed; the history is therefore identical across modes and the mode is only
// revealed by the future. Modes:
//   fork:        lateral offsets ramping in with a smoothstep over ramp_length
//   arc_choice:  constant-curvature arcs of the given radius (left / right,
//                plus straight when three modes are requested)
//   merge:       keep lane, merge into a lane lane_offset to the left, and
//                (third mode) keep lane while braking to half speed
// Each scene is then placed in the world with a random rigid pose.

#include "vbmix/scene.hpp"
#include "vbmix/scene_io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vbmix
{

enum class Geometry { kFork, kArcChoice, kMerge };

std::string to_string(Geometry g);
Geometry parse_geometry(const std::string & s);

/// Geometry parameters; which ones matter depends on the geometry.
struct GeometryParams
{
  double radius = 20.0;       // arc_choice
  double ramp_length = 15.0;  // fork, merge
  double lane_offset = 8.0;   // merge

  bool operator==(const GeometryParams &) const = default;
};

struct GeneratorConfig
{
  std::uint64_t seed = 0;
  int n_scenes = 1000;
  int history = 8;
  int future = 12;
  double step_seconds = 0.25;
  Geometry geometry = Geometry::kFork;
  int mode_count = 2;
  double mode_separation = 8.0;
  double speed_min = 6.0;
  double speed_max = 10.0;
  double noise_std = 0.2;
  int max_neighbors = 2;
  GeometryParams params;
  std::optional<GeometryParams> ood_params;
  /// Share of n_scenes emitted by the OOD split; the ID split gets the rest.
  double ood_fraction = 0.0;

  bool operator==(const GeneratorConfig &) const = default;
};

/// Throws Error(kInvalidConfig).
void validate(const GeneratorConfig & config);

int ood_scene_count(const GeneratorConfig & config);
int id_scene_count(const GeneratorConfig & config);

/// A generated scene plus the latent labels the generator drew it from.
struct LabeledScene
{
  Scene scene;
  int mode = 0;
  double speed = 0.0;
  Pose2 world_pose;
  GeometryParams params;
};

std::vector<LabeledScene> generate_labeled(const GeneratorConfig & config, bool ood);

/// In-distribution split: id_scene_count(config) scenes tagged ood=false.
std::vector<Scene> generate_dataset(const GeneratorConfig & config);
/// OOD split with `ood_params` overriding the geometry, tagged ood=true.
std::vector<Scene> generate_ood_split(const GeneratorConfig & config);

/// Noise-free future of one mode in the local frame (target at the origin).
Path canonical_future(
  const GeneratorConfig & config, const GeometryParams & params, int mode, double speed);

SceneFile to_scene_file(const GeneratorConfig & config, std::vector<Scene> scenes);

}  // namespace vbmix

#endif  // VBMIX__SYNTHETIC_HPP_
