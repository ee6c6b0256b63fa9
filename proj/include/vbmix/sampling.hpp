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

#ifndef VBMIX__SAMPLING_HPP_
#define VBMIX__SAMPLING_HPP_

// Representative trajectory sets.
//
// Each selected component is rolled out along its most likely latent path
// and decoded; positions are cumulative sums of independent Gaussian
// displacements, so the position at step t is Gaussian with the summed means
// and covariances. Endpoint candidates on a regular grid are scored by the
// final-step mixture density, thinned greedily by circle overlap, and each
// survivor is completed backwards by reusing its whitened offset from the
// final mean at every earlier step.

#include "vbmix/mixture.hpp"

#include <string>
#include <vector>

namespace vbmix
{

struct EndpointComponent
{
  int component = 0;  // index into the model's K components
  double weight = 0.0;
  std::vector<Eigen::Vector2d> mean;  // cumulative, one per step
  std::vector<Eigen::Matrix2d> cov;   // cumulative, one per step
};

struct EndpointDistribution
{
  std::vector<EndpointComponent> components;

  int steps() const { return static_cast<int>(components.front().mean.size()); }
};

/// Builds cumulative Gaussians from per-step displacement Gaussians.
EndpointComponent accumulate_steps(
  int component, double weight, const std::vector<Eigen::Vector2d> & step_mean,
  const std::vector<Eigen::Matrix2d> & step_cov);

/// Throws Error(kInvalidInput) if top_c is outside [1, K].
EndpointDistribution endpoint_distribution(const Model & m, const Eigen::VectorXd & x, int top_c);

double gaussian2_density(const Eigen::Vector2d & p, const Eigen::Vector2d & mean, const Eigen::Matrix2d & cov);

/// sum_c w_c N(p; mean_c[step], cov_c[step]); step defaults to the last.
double mixture_density(const EndpointDistribution & d, const Eigen::Vector2d & p, int step = -1);

struct Candidate
{
  Point position = Point::Zero();
  double score = 0.0;
};

/// Number of grid points per axis covering [lo, hi] at the given resolution.
int grid_count(double lo, double hi, double resolution);

/// Axis-aligned grid over the union of mean +- n_sigma * per-axis std boxes
/// at the final step, scored by the final-step mixture density.
std::vector<Candidate> dense_grid(
  const EndpointDistribution & d, double resolution = 0.5, double n_sigma = 2.0);

/// Area IoU of two circles of radius r.
double circle_iou(const Point & a, const Point & b, double r);

/// Greedy selection by descending score (ties: lower x, then lower y);
/// every remaining candidate whose IoU with a selection exceeds the
/// threshold is removed.
std::vector<Candidate> nms_select(
  std::vector<Candidate> candidates, double radius, double iou_threshold, int M);

/// Waypoints for a final position y under one component: with
/// cov_T = L_T L_T^T and u = L_T^-1 (y - mean_T), waypoint t is
/// mean_t + L_t u; the last waypoint is y itself.
Path complete_trajectory(const Point & endpoint, const EndpointComponent & component);

/// Index into d.components with the largest weighted final-step density.
std::size_t responsible_component(const EndpointDistribution & d, const Point & p);

struct SamplingConfig
{
  int M = 6;
  double radius = 1.4;
  double iou_threshold = 0.0;
  double resolution = 0.5;
  double n_sigma = 2.0;
  int top_c = 6;  // capped at K

  bool operator==(const SamplingConfig &) const = default;
};

/// Throws Error(kInvalidConfig).
void validate(const SamplingConfig & config);

struct PredictionSet
{
  std::string scene_id;
  std::vector<Path> trajectories;  // world frame
  std::vector<double> scores;
  std::vector<int> component_of;
  bool exhausted = false;  // fewer than M candidates survived
};

PredictionSet predict_top_m(const Model & m, const PreparedScene & scene, const SamplingConfig & config);

}  // namespace vbmix

#endif  // VBMIX__SAMPLING_HPP_
