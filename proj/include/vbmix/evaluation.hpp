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

#ifndef VBMIX__EVALUATION_HPP_
#define VBMIX__EVALUATION_HPP_

#include "vbmix/mixture.hpp"
#include "vbmix/sampling.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace vbmix
{

// ---------------------------------------------------------------------------
// Predictive entropy.
// ---------------------------------------------------------------------------

/// Entropy in nats of a Gaussian with covariance L L^T, from the log of the
/// factor's diagonal.
double gaussian_entropy(const Eigen::VectorXd & log_factor_diagonal);
/// Same for a lower-triangular factor.
double gaussian_entropy(const Eigen::MatrixXd & factor);

struct EntropyReport
{
  double term_s = 0.0;  // expected displacement entropy, summed over steps
  double term_v = 0.0;  // expected latent entropy, summed over steps
  double term_z = 0.0;  // log K
  double total = 0.0;
};

/// Monte-Carlo estimate with n_mc prior paths per component; the expectation
/// over the uniform component prior is taken exactly.
EntropyReport total_entropy(const Model & m, const Eigen::VectorXd & x, int n_mc, std::mt19937_64 & rng);

struct EntropyGroup
{
  std::string geometry;
  bool ood = false;
  int n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};

struct EntropyChange
{
  std::string geometry;
  double id_mean = 0.0;
  double ood_mean = 0.0;
  double percent = 0.0;  // 100 * (ood - id) / |id|
};

struct OodReport
{
  std::vector<EntropyGroup> groups;
  std::vector<EntropyChange> changes;
  std::vector<std::string> notices;
  std::vector<double> scene_entropy;  // per input scene, in input order
};

/// Scene i uses an RNG stream derived from (seed, i).
OodReport ood_report(const Model & m, const std::vector<PreparedScene> & scenes, int n_mc, std::uint64_t seed);

std::string format_ood_report(const OodReport & r);

// ---------------------------------------------------------------------------
// Displacement metrics.
// ---------------------------------------------------------------------------

double min_ade(const std::vector<Path> & predictions, const Path & gt);
double min_fde(const std::vector<Path> & predictions, const Path & gt);

/// Longitudinal miss threshold in meters for a speed in m/s.
double threshold_lon(double speed);

/// Miss iff no prediction endpoint lies within the lateral (1 m) and
/// speed-dependent longitudinal tolerance in the frame of the final yaw.
bool miss_interaction(const std::vector<Path> & predictions, const Path & gt, double final_yaw, double speed);

/// Miss iff every prediction endpoint is more than 2 m from the gt endpoint.
bool miss_argoverse(const std::vector<Path> & predictions, const Path & gt);

struct FinalKinematics
{
  double yaw = 0.0;
  double speed = 0.0;
};

/// Heading and speed of the last ground-truth step; `anchor` is the position
/// preceding gt[0].
FinalKinematics final_kinematics(const Path & gt, const Point & anchor, double step_seconds);

enum class MissRateKind { kInteraction, kArgoverse };

MissRateKind parse_miss_rate(const std::string & s);
std::string to_string(MissRateKind kind);

struct MetricsReport
{
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  int n_scenes = 0;
  int k_used = 0;  // largest prediction count over scenes
};

/// Averages over scenes; predictions[i] pairs with scenes[i] (world frame,
/// future required).
MetricsReport evaluate_predictions(
  const std::vector<std::vector<Path>> & predictions, const std::vector<Scene> & scenes,
  double step_seconds, MissRateKind kind);

std::string format_metrics_report(const MetricsReport & r, MissRateKind kind);

/// Constant-velocity extrapolation of the target's last state.
Path constant_velocity(const Scene & scene, int T, double step_seconds);

// ---------------------------------------------------------------------------
// Heatmaps.
// ---------------------------------------------------------------------------

struct Region
{
  double x_min = -10.0;
  double x_max = 40.0;
  double y_min = -25.0;
  double y_max = 25.0;
};

struct Heatmap
{
  Region region;
  double resolution = 0.5;
  int nx = 0;
  int ny = 0;
  std::vector<double> values;  // row-major, row iy has y = y_min + iy * resolution

  double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy * nx + ix)]; }
};

/// log max_t sum_c w_c N(g; mean_ct, cov_ct) at every cell center g.
Heatmap heatmap(const EndpointDistribution & d, const Region & region, double resolution);

/// Header lines then one row of values per line.
std::string format_heatmap(const Heatmap & h);
/// Binary PPM, brighter is more likely; rows flipped so +y is up.
std::string render_heatmap_ppm(const Heatmap & h);

}  // namespace vbmix

#endif  // VBMIX__EVALUATION_HPP_
