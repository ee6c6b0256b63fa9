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

#ifndef VBMIX__SCENE_HPP_
#define VBMIX__SCENE_HPP_

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vbmix
{

using Point = Eigen::Vector2d;
using Path = std::vector<Point>;

/// Kinematic state of one agent at one time step.
struct MotionState
{
  double x = 0.0;        // m
  double y = 0.0;        // m
  double heading = 0.0;  // rad, (-pi, pi]
  double vx = 0.0;       // m/s
  double vy = 0.0;       // m/s

  Point position() const { return {x, y}; }
  Point velocity() const { return {vx, vy}; }
  bool operator==(const MotionState &) const = default;
};

struct AgentTrack
{
  std::string agent_id;
  std::vector<MotionState> states;  // oldest first, exactly H entries
};

/// One map vector: head -> tail.
struct MapVector
{
  Point head;
  Point tail;
};

/// Consecutive vectors chain: tail of i equals head of i + 1.
struct MapPolyline
{
  std::vector<MapVector> vectors;
};

struct SceneMeta
{
  std::string geometry;
  bool ood = false;
};

struct Scene
{
  std::string scene_id;
  AgentTrack target;
  std::vector<AgentTrack> neighbors;
  std::vector<MapPolyline> map;
  std::optional<Path> future;  // T positions, training/evaluation only
  SceneMeta meta;
};

/// Rigid frame: the target-centric frame is the world frame translated to
/// `origin` and rotated by `heading`.
struct Pose2
{
  Point origin = Point::Zero();
  double heading = 0.0;

  static Pose2 identity() { return {}; }
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// World -> frame for a single point.
Point to_frame(const Point & world, const Pose2 & pose);
/// Frame -> world for a single point.
Point from_frame(const Point & local, const Pose2 & pose);

/// Translates/rotates every coordinate of the scene so the target's last
/// history state sits at the origin heading +x. Returns the pose that maps
/// frame coordinates back to the world.
std::pair<Scene, Pose2> to_target_frame(const Scene & scene);

Path from_target_frame(const Path & points, const Pose2 & pose);

/// s_t = p_t - p_{t-1}, with p_0 = anchor.
Path positions_to_displacements(const Path & positions, const Point & anchor);
/// Cumulative sum starting from the anchor.
Path displacements_to_positions(const Path & displacements, const Point & anchor);

/// Splits polylines with more than `max_vectors` vectors into chained pieces.
std::vector<MapPolyline> split_polylines(
  const std::vector<MapPolyline> & map, std::size_t max_vectors);

/// Horizons a scene is validated against.
struct Horizons
{
  int history = 0;  // H
  int future = 0;   // T
};

/// Throws Error(kInvalidInput) naming the offending field.
void validate_scene(const Scene & scene, const Horizons & horizons);

}  // namespace vbmix

#endif  // VBMIX__SCENE_HPP_
