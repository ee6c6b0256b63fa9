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

#include "vbmix/synthetic.hpp"

#include "vbmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace vbmix
{

namespace
{

constexpr double kTableStep = 0.01;     // m, arc-length table resolution
constexpr double kMapSpacing = 2.5;     // m between map polyline points
constexpr double kMapMargin = 10.0;     // m of lane beyond the farthest reach
constexpr double kLaneWidth = 4.0;      // m, neighbor lane spacing
constexpr double kWorldExtent = 200.0;  // m, world placement box half-width

double smoothstep(double u)
{
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

/// One mode's lane centerline parameterized by arc length from the origin.
class ModePath
{
public:
  ModePath(Geometry g, const GeometryParams & p, int mode, int mode_count, double sep, double max_s)
  : geometry_(g), params_(p), mode_(mode)
  {
    if (geometry_ == Geometry::kFork) {
      if (mode_count == 2) {
        lateral_ = mode == 0 ? 0.5 * sep : -0.5 * sep;
      } else {
        lateral_ = sep * static_cast<double>(1 - mode);
      }
    } else if (geometry_ == Geometry::kMerge) {
      lateral_ = mode == 1 ? p.lane_offset : 0.0;
    }
    if (geometry_ != Geometry::kArcChoice && lateral_ != 0.0) {
      // Tabulate arc length against x for the smoothstep lane change.
      double x = 0.0, s = 0.0;
      xs_.push_back(0.0);
      ss_.push_back(0.0);
      while (s < max_s) {
        const double xm = x + 0.5 * kTableStep;
        const double slope = lateral_ * 6.0 * (xm / p.ramp_length) *
                             (1.0 - xm / p.ramp_length) / p.ramp_length *
                             (xm < p.ramp_length ? 1.0 : 0.0);
        s += kTableStep * std::sqrt(1.0 + slope * slope);
        x += kTableStep;
        xs_.push_back(x);
        ss_.push_back(s);
      }
    }
  }

  Point at(double s) const
  {
    if (s <= 0.0) {
      return {s, 0.0};
    }
    switch (geometry_) {
      case Geometry::kArcChoice: {
        // mode 0 turns left, mode 1 right, mode 2 goes straight
        if (mode_ == 2) {
          return {s, 0.0};
        }
        const double r = params_.radius;
        const double sign = mode_ == 0 ? 1.0 : -1.0;
        return {r * std::sin(s / r), sign * r * (1.0 - std::cos(s / r))};
      }
      case Geometry::kFork:
      case Geometry::kMerge: {
        if (lateral_ == 0.0) {
          return {s, 0.0};
        }
        const double x = x_at(s);
        return {x, lateral_ * smoothstep(x / params_.ramp_length)};
      }
    }
    return {s, 0.0};
  }

private:
  double x_at(double s) const
  {
    auto it = std::lower_bound(ss_.begin(), ss_.end(), s);
    if (it == ss_.end()) {
      return xs_.back() + (s - ss_.back());
    }
    const auto i = static_cast<std::size_t>(it - ss_.begin());
    if (i == 0) {
      return xs_[0];
    }
    const double f = (s - ss_[i - 1]) / (ss_[i] - ss_[i - 1]);
    return xs_[i - 1] + f * (xs_[i] - xs_[i - 1]);
  }

  Geometry geometry_;
  GeometryParams params_;
  int mode_;
  double lateral_ = 0.0;
  std::vector<double> xs_, ss_;
};

/// Arc length travelled after `tau` seconds of the future.
double progress(const GeneratorConfig & c, int mode, double speed, double tau)
{
  if (c.geometry == Geometry::kMerge && mode == 2) {
    const double horizon = c.future * c.step_seconds;
    return speed * tau - speed * tau * tau / (2.0 * horizon);
  }
  return speed * tau;
}

double max_reach(const GeneratorConfig & c)
{
  return c.speed_max * c.future * c.step_seconds + kMapMargin;
}

std::mt19937_64 scene_rng(std::uint64_t seed, bool ood, int index)
{
  std::seed_seq seq{
    static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
    static_cast<std::uint32_t>(ood ? 1 : 0), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

Path future_on(const GeneratorConfig & c, const ModePath & path, int mode, double speed)
{
  Path f;
  f.reserve(static_cast<std::size_t>(c.future));
  for (int t = 1; t <= c.future; ++t) {
    f.push_back(path.at(progress(c, mode, speed, t * c.step_seconds)));
  }
  return f;
}

std::vector<ModePath> build_paths(const GeneratorConfig & c, const GeometryParams & p)
{
  std::vector<ModePath> paths;
  for (int m = 0; m < c.mode_count; ++m) {
    paths.emplace_back(c.geometry, p, m, c.mode_count, c.mode_separation, max_reach(c));
  }
  return paths;
}

MapPolyline sample_polyline(const std::vector<Point> & pts)
{
  MapPolyline pl;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    pl.vectors.push_back(MapVector{pts[i - 1], pts[i]});
  }
  return pl;
}

/// Lane centerlines of every mode in the local frame.
std::vector<MapPolyline> local_map(
  const GeneratorConfig & c, const GeometryParams & p, const std::vector<ModePath> & paths)
{
  const double back = c.speed_max * (c.history - 1) * c.step_seconds + kMapMargin;
  const double fwd = max_reach(c);
  std::vector<MapPolyline> map;
  const int n_back = static_cast<int>(std::ceil(back / kMapSpacing));
  const int n_fwd = static_cast<int>(std::ceil(fwd / kMapSpacing));
  for (const auto & path : paths) {
    std::vector<Point> pts;
    for (int i = -n_back; i <= n_fwd; ++i) {
      pts.push_back(path.at(i * kMapSpacing));
    }
    map.push_back(sample_polyline(pts));
  }
  if (c.geometry == Geometry::kMerge) {
    std::vector<Point> pts;
    for (int i = -n_back; i <= n_fwd; ++i) {
      pts.emplace_back(i * kMapSpacing, p.lane_offset);
    }
    map.push_back(sample_polyline(pts));
  }
  return map;
}

Point sample_truncated_noise(std::mt19937_64 & rng, double std_dev)
{
  if (std_dev <= 0.0) {
    return Point::Zero();
  }
  std::normal_distribution<double> n(0.0, std_dev);
  // Rejection keeps every position within two standard deviations, so
  // consecutive-step displacement errors stay below four.
  for (;;) {
    Point e(n(rng), n(rng));
    if (e.norm() <= 2.0 * std_dev) {
      return e;
    }
  }
}

std::string scene_id(bool ood, int index)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%06d", ood ? "ood" : "id", index);
  return buf;
}

}  // namespace

std::string to_string(Geometry g)
{
  switch (g) {
    case Geometry::kFork:
      return "fork";
    case Geometry::kArcChoice:
      return "arc_choice";
    case Geometry::kMerge:
      return "merge";
  }
  return "fork";
}

Geometry parse_geometry(const std::string & s)
{
  if (s == "fork") return Geometry::kFork;
  if (s == "arc_choice") return Geometry::kArcChoice;
  if (s == "merge") return Geometry::kMerge;
  throw invalid_config("unknown geometry \"" + s + "\" (fork, arc_choice, merge)");
}

int ood_scene_count(const GeneratorConfig & config)
{
  return static_cast<int>(std::lround(config.n_scenes * config.ood_fraction));
}

int id_scene_count(const GeneratorConfig & config)
{
  return config.n_scenes - ood_scene_count(config);
}

Path canonical_future(
  const GeneratorConfig & config, const GeometryParams & params, int mode, double speed)
{
  const ModePath path(
    config.geometry, params, mode, config.mode_count, config.mode_separation, max_reach(config));
  return future_on(config, path, mode, speed);
}

void validate(const GeneratorConfig & c)
{
  if (c.n_scenes < 0) throw invalid_config("n_scenes must be >= 0");
  if (c.history < 2) throw invalid_config("H must be >= 2");
  if (c.future < 1) throw invalid_config("T must be >= 1");
  if (!(c.step_seconds > 0.0)) throw invalid_config("step_seconds must be > 0");
  if (c.mode_count != 2 && c.mode_count != 3) throw invalid_config("mode_count must be 2 or 3");
  if (!(c.mode_separation > 0.0)) throw invalid_config("mode_separation must be > 0");
  if (!(c.noise_std >= 0.0)) throw invalid_config("noise_std must be >= 0");
  if (!(c.speed_min > 0.0) || c.speed_max < c.speed_min) {
    throw invalid_config("speed_range must satisfy 0 < min <= max");
  }
  if (c.max_neighbors < 0) throw invalid_config("max_neighbors must be >= 0");
  if (!(c.ood_fraction >= 0.0 && c.ood_fraction <= 1.0)) {
    throw invalid_config("ood_fraction must lie in [0, 1]");
  }
  const auto check_params = [](const GeometryParams & p, const char * which) {
    if (!(p.radius > 0.0) || !(p.ramp_length > 0.0) || !(p.lane_offset > 0.0)) {
      throw invalid_config(std::string(which) + " geometry parameters must be positive");
    }
  };
  check_params(c.params, "base");
  if (c.ood_params) {
    check_params(*c.ood_params, "ood");
    if (*c.ood_params == c.params) {
      throw invalid_config("ood_params are identical to the base geometry");
    }
  }
  // Mode endpoint centroids over a speed grid must honor the separation.
  std::vector<Point> centroids(static_cast<std::size_t>(c.mode_count), Point::Zero());
  constexpr int kSpeeds = 21;
  for (int m = 0; m < c.mode_count; ++m) {
    const ModePath path(c.geometry, c.params, m, c.mode_count, c.mode_separation, max_reach(c));
    for (int i = 0; i < kSpeeds; ++i) {
      const double v = c.speed_min + (c.speed_max - c.speed_min) * i / (kSpeeds - 1);
      centroids[static_cast<std::size_t>(m)] += future_on(c, path, m, v).back() / kSpeeds;
    }
  }
  for (int a = 0; a < c.mode_count; ++a) {
    for (int b = a + 1; b < c.mode_count; ++b) {
      const double d =
        (centroids[static_cast<std::size_t>(a)] - centroids[static_cast<std::size_t>(b)]).norm();
      if (d < c.mode_separation) {
        throw invalid_config(
          "geometry " + to_string(c.geometry) + " separates modes " + std::to_string(a) +
          " and " + std::to_string(b) + " by only " + std::to_string(d) +
          " m < mode_separation");
      }
    }
  }
}

std::vector<LabeledScene> generate_labeled(const GeneratorConfig & c, bool ood)
{
  validate(c);
  if (ood && !c.ood_params) {
    throw invalid_config("OOD split requested without ood_params");
  }
  const GeometryParams params = ood ? *c.ood_params : c.params;
  const int count = ood ? ood_scene_count(c) : id_scene_count(c);
  const std::vector<ModePath> paths = build_paths(c, params);
  const std::vector<MapPolyline> map = local_map(c, params, paths);

  std::vector<LabeledScene> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng = scene_rng(c.seed, ood, i);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int mode = i % c.mode_count;
    const double speed = c.speed_min + (c.speed_max - c.speed_min) * unit(rng);
    Pose2 pose;
    pose.origin = Point(
      kWorldExtent * (2.0 * unit(rng) - 1.0), kWorldExtent * (2.0 * unit(rng) - 1.0));
    pose.heading = wrap_angle(std::numbers::pi * (2.0 * unit(rng) - 1.0));

    const auto world = [&pose](const Point & p) { return from_frame(p, pose); };
    const auto world_vec = [&pose](const Point & v) {
      return from_frame(v, Pose2{Point::Zero(), pose.heading});
    };

    Scene s;
    s.scene_id = scene_id(ood, i);
    s.meta.geometry = to_string(c.geometry);
    s.meta.ood = ood;
    s.target.agent_id = "target";
    for (int h = 0; h < c.history; ++h) {
      const double tau = (h - (c.history - 1)) * c.step_seconds;
      const Point p = world(Point(speed * tau, 0.0));
      const Point v = world_vec(Point(speed, 0.0));
      s.target.states.push_back(MotionState{p.x(), p.y(), pose.heading, v.x(), v.y()});
    }

    const int n_neighbors =
      c.max_neighbors == 0 ? 0 : static_cast<int>(rng() % static_cast<std::uint64_t>(c.max_neighbors + 1));
    for (int n = 0; n < n_neighbors; ++n) {
      const double lane = (unit(rng) < 0.5 ? -1.0 : 1.0) * kLaneWidth * (1.0 + std::floor(2.0 * unit(rng)));
      const double offset = 50.0 * unit(rng) - 25.0;
      const double vn = c.speed_min + (c.speed_max - c.speed_min) * unit(rng);
      AgentTrack t;
      t.agent_id = "n" + std::to_string(n);
      for (int h = 0; h < c.history; ++h) {
        const double tau = (h - (c.history - 1)) * c.step_seconds;
        const Point p = world(Point(offset + vn * tau, lane));
        const Point v = world_vec(Point(vn, 0.0));
        t.states.push_back(MotionState{p.x(), p.y(), pose.heading, v.x(), v.y()});
      }
      s.neighbors.push_back(std::move(t));
    }

    for (const auto & pl : map) {
      MapPolyline w;
      w.vectors.reserve(pl.vectors.size());
      for (const auto & v : pl.vectors) {
        w.vectors.push_back(MapVector{world(v.head), world(v.tail)});
      }
      s.map.push_back(std::move(w));
    }

    Path fut = future_on(c, paths[static_cast<std::size_t>(mode)], mode, speed);
    for (auto & p : fut) {
      p = world(p + sample_truncated_noise(rng, c.noise_std));
    }
    s.future = std::move(fut);

    out.push_back(LabeledScene{std::move(s), mode, speed, pose, params});
  }
  return out;
}

std::vector<Scene> generate_dataset(const GeneratorConfig & config)
{
  std::vector<Scene> out;
  for (auto & l : generate_labeled(config, false)) {
    out.push_back(std::move(l.scene));
  }
  return out;
}

std::vector<Scene> generate_ood_split(const GeneratorConfig & config)
{
  std::vector<Scene> out;
  for (auto & l : generate_labeled(config, true)) {
    out.push_back(std::move(l.scene));
  }
  return out;
}

SceneFile to_scene_file(const GeneratorConfig & config, std::vector<Scene> scenes)
{
  SceneFile f;
  f.header.history = config.history;
  f.header.future = config.future;
  f.header.step_seconds = config.step_seconds;
  f.scenes = std::move(scenes);
  return f;
}

}  // namespace vbmix
