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

#include "vbmix/scene.hpp"

#include "vbmix/error.hpp"

#include <cmath>
#include <numbers>

namespace vbmix
{

namespace
{

constexpr double kChainTolerance = 1e-6;

Eigen::Matrix2d rotation(double angle)
{
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

struct FrameMap
{
  Eigen::Matrix2d world_to_frame;
  Point origin;

  Point point(const Point & p) const { return world_to_frame * (p - origin); }
  Point vector(const Point & v) const { return world_to_frame * v; }
};

MotionState map_state(const MotionState & s, const FrameMap & m, double heading)
{
  const Point p = m.point(s.position());
  const Point v = m.vector(s.velocity());
  return MotionState{p.x(), p.y(), wrap_angle(s.heading - heading), v.x(), v.y()};
}

AgentTrack map_track(const AgentTrack & t, const FrameMap & m, double heading)
{
  AgentTrack out;
  out.agent_id = t.agent_id;
  out.states.reserve(t.states.size());
  for (const auto & s : t.states) {
    out.states.push_back(map_state(s, m, heading));
  }
  return out;
}

bool finite(const Point & p) { return std::isfinite(p.x()) && std::isfinite(p.y()); }

void validate_track(const AgentTrack & t, int h, const std::string & field)
{
  if (static_cast<int>(t.states.size()) != h) {
    throw invalid_input(
      field + " history length " + std::to_string(t.states.size()) + " != H=" +
      std::to_string(h));
  }
  for (std::size_t i = 0; i < t.states.size(); ++i) {
    const auto & s = t.states[i];
    if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.heading) ||
        !std::isfinite(s.vx) || !std::isfinite(s.vy)) {
      throw invalid_input(field + ".states[" + std::to_string(i) + "] is not finite");
    }
    if (!(s.heading > -std::numbers::pi) || s.heading > std::numbers::pi) {
      throw invalid_input(field + ".states[" + std::to_string(i) + "].heading out of (-pi, pi]");
    }
  }
}

}  // namespace

double wrap_angle(double a)
{
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) {
    r += 2.0 * std::numbers::pi;
  }
  return r;
}

Point to_frame(const Point & world, const Pose2 & pose)
{
  return rotation(-pose.heading) * (world - pose.origin);
}

Point from_frame(const Point & local, const Pose2 & pose)
{
  return rotation(pose.heading) * local + pose.origin;
}

std::pair<Scene, Pose2> to_target_frame(const Scene & scene)
{
  if (scene.target.states.empty()) {
    throw invalid_input("target track is empty");
  }
  const MotionState & last = scene.target.states.back();
  Pose2 pose{last.position(), last.heading};
  const FrameMap m{rotation(-pose.heading), pose.origin};

  Scene out;
  out.scene_id = scene.scene_id;
  out.meta = scene.meta;
  out.target = map_track(scene.target, m, pose.heading);
  out.neighbors.reserve(scene.neighbors.size());
  for (const auto & n : scene.neighbors) {
    out.neighbors.push_back(map_track(n, m, pose.heading));
  }
  out.map.reserve(scene.map.size());
  for (const auto & pl : scene.map) {
    MapPolyline mp;
    mp.vectors.reserve(pl.vectors.size());
    for (const auto & v : pl.vectors) {
      mp.vectors.push_back(MapVector{m.point(v.head), m.point(v.tail)});
    }
    out.map.push_back(std::move(mp));
  }
  if (scene.future) {
    Path f;
    f.reserve(scene.future->size());
    for (const auto & p : *scene.future) {
      f.push_back(m.point(p));
    }
    out.future = std::move(f);
  }
  return {std::move(out), pose};
}

Path from_target_frame(const Path & points, const Pose2 & pose)
{
  const Eigen::Matrix2d r = rotation(pose.heading);
  Path out;
  out.reserve(points.size());
  for (const auto & p : points) {
    out.push_back(r * p + pose.origin);
  }
  return out;
}

Path positions_to_displacements(const Path & positions, const Point & anchor)
{
  Path out;
  out.reserve(positions.size());
  Point prev = anchor;
  for (const auto & p : positions) {
    out.push_back(p - prev);
    prev = p;
  }
  return out;
}

Path displacements_to_positions(const Path & displacements, const Point & anchor)
{
  Path out;
  out.reserve(displacements.size());
  Point acc = anchor;
  for (const auto & d : displacements) {
    acc += d;
    out.push_back(acc);
  }
  return out;
}

std::vector<MapPolyline> split_polylines(
  const std::vector<MapPolyline> & map, std::size_t max_vectors)
{
  if (max_vectors == 0) {
    throw invalid_config("max polyline vectors must be >= 1");
  }
  std::vector<MapPolyline> out;
  for (const auto & pl : map) {
    for (std::size_t start = 0; start < pl.vectors.size(); start += max_vectors) {
      const std::size_t end = std::min(pl.vectors.size(), start + max_vectors);
      MapPolyline piece;
      piece.vectors.assign(
        pl.vectors.begin() + static_cast<std::ptrdiff_t>(start),
        pl.vectors.begin() + static_cast<std::ptrdiff_t>(end));
      out.push_back(std::move(piece));
    }
  }
  return out;
}

void validate_scene(const Scene & scene, const Horizons & horizons)
{
  validate_track(scene.target, horizons.history, "target");
  for (std::size_t i = 0; i < scene.neighbors.size(); ++i) {
    validate_track(scene.neighbors[i], horizons.history, "neighbors[" + std::to_string(i) + "]");
  }
  for (std::size_t i = 0; i < scene.map.size(); ++i) {
    const auto & pl = scene.map[i];
    const std::string field = "map[" + std::to_string(i) + "]";
    if (pl.vectors.empty()) {
      throw invalid_input(field + " has no vectors");
    }
    for (std::size_t j = 0; j < pl.vectors.size(); ++j) {
      if (!finite(pl.vectors[j].head) || !finite(pl.vectors[j].tail)) {
        throw invalid_input(field + ".vectors[" + std::to_string(j) + "] is not finite");
      }
      if (j > 0 && (pl.vectors[j - 1].tail - pl.vectors[j].head).norm() > kChainTolerance) {
        throw invalid_input(field + ".vectors[" + std::to_string(j) + "] does not chain");
      }
    }
  }
  if (scene.future) {
    if (static_cast<int>(scene.future->size()) != horizons.future) {
      throw invalid_input(
        "future length " + std::to_string(scene.future->size()) + " != T=" +
        std::to_string(horizons.future));
    }
    for (const auto & p : *scene.future) {
      if (!finite(p)) {
        throw invalid_input("future point is not finite");
      }
    }
  }
}

}  // namespace vbmix
