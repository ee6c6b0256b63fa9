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

#include "vbmix/sampling.hpp"

#include "vbmix/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace vbmix
{

EndpointComponent accumulate_steps(
  int component, double weight, const std::vector<Eigen::Vector2d> & step_mean,
  const std::vector<Eigen::Matrix2d> & step_cov)
{
  EndpointComponent c;
  c.component = component;
  c.weight = weight;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t t = 0; t < step_mean.size(); ++t) {
    mean += step_mean[t];
    cov += step_cov[t];
    c.mean.push_back(mean);
    c.cov.push_back(cov);
  }
  return c;
}

EndpointDistribution endpoint_distribution(const Model & m, const Eigen::VectorXd & x, int top_c)
{
  const MixtureConfig & c = m.mixture();
  if (top_c < 1 || top_c > c.K) {
    throw invalid_input("top_c=" + std::to_string(top_c) + " outside [1, K=" + std::to_string(c.K) + "]");
  }
  const Eigen::VectorXd pi = assignment_forward(m, x).probs;
  std::vector<int> order(static_cast<std::size_t>(c.K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&pi](int a, int b) { return pi(a) > pi(b); });
  order.resize(static_cast<std::size_t>(top_c));
  double total = 0.0;
  for (int k : order) {
    total += pi(k);
  }

  ad::Tape t(m.store, false);
  const ad::Var xv = t.constant(x.transpose());
  EndpointDistribution d;
  for (int k : order) {
    const PriorRollout r = prior_rollout_graph(t, m, xv, k, {});
    const ad::Matrix dec = decode_graph(t, m, xv, r.v).value();
    std::vector<Eigen::Vector2d> mean;
    std::vector<Eigen::Matrix2d> cov;
    for (Eigen::Index s = 0; s < dec.rows(); ++s) {
      Gaussian2Full g;
      g.mean = dec.block(s, 0, 1, 2).transpose();
      g.log_l11 = dec(s, 2);
      g.l21 = dec(s, 3);
      g.log_l22 = dec(s, 4);
      mean.push_back(g.mean);
      cov.push_back(g.covariance());
    }
    d.components.push_back(accumulate_steps(k, pi(k) / total, mean, cov));
  }
  return d;
}

double gaussian2_density(const Eigen::Vector2d & p, const Eigen::Vector2d & mean, const Eigen::Matrix2d & cov)
{
  const Eigen::LLT<Eigen::Matrix2d> llt(cov);
  const Eigen::Matrix2d & l = llt.matrixLLT();
  const Eigen::Vector2d z = llt.matrixL().solve(p - mean);
  const double log_det_half = std::log(l(0, 0)) + std::log(l(1, 1));
  return std::exp(-0.5 * z.squaredNorm() - log_det_half - std::log(2.0 * std::numbers::pi));
}

double mixture_density(const EndpointDistribution & d, const Eigen::Vector2d & p, int step)
{
  const auto s = static_cast<std::size_t>(step < 0 ? d.steps() - 1 : step);
  double total = 0.0;
  for (const auto & c : d.components) {
    total += c.weight * gaussian2_density(p, c.mean[s], c.cov[s]);
  }
  return total;
}

int grid_count(double lo, double hi, double resolution)
{
  return static_cast<int>(std::floor((hi - lo) / resolution + 1e-9)) + 1;
}

std::vector<Candidate> dense_grid(const EndpointDistribution & d, double resolution, double n_sigma)
{
  if (!(resolution > 0.0)) {
    throw invalid_input("grid resolution must be > 0");
  }
  const std::size_t last = static_cast<std::size_t>(d.steps() - 1);
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(HUGE_VAL);
  Eigen::Vector2d hi = Eigen::Vector2d::Constant(-HUGE_VAL);
  for (const auto & c : d.components) {
    const Eigen::Vector2d sd = c.cov[last].diagonal().cwiseSqrt();
    lo = lo.cwiseMin(c.mean[last] - n_sigma * sd);
    hi = hi.cwiseMax(c.mean[last] + n_sigma * sd);
  }
  const int nx = grid_count(lo.x(), hi.x(), resolution);
  const int ny = grid_count(lo.y(), hi.y(), resolution);
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const Point p(lo.x() + ix * resolution, lo.y() + iy * resolution);
      out.push_back(Candidate{p, mixture_density(d, p)});
    }
  }
  return out;
}

double circle_iou(const Point & a, const Point & b, double r)
{
  const double dist = (a - b).norm();
  if (dist >= 2.0 * r) {
    return 0.0;
  }
  if (dist == 0.0) {
    return 1.0;
  }
  const double area = std::numbers::pi * r * r;
  const double lens =
    2.0 * r * r * std::acos(dist / (2.0 * r)) - 0.5 * dist * std::sqrt(4.0 * r * r - dist * dist);
  return lens / (2.0 * area - lens);
}

std::vector<Candidate> nms_select(
  std::vector<Candidate> candidates, double radius, double iou_threshold, int M)
{
  std::sort(candidates.begin(), candidates.end(), [](const Candidate & a, const Candidate & b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.position.x() != b.position.x()) return a.position.x() < b.position.x();
    return a.position.y() < b.position.y();
  });
  std::vector<Candidate> out;
  std::vector<bool> removed(candidates.size(), false);
  for (std::size_t i = 0; i < candidates.size() && static_cast<int>(out.size()) < M; ++i) {
    if (removed[i]) {
      continue;
    }
    out.push_back(candidates[i]);
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      if (!removed[j] &&
          circle_iou(candidates[i].position, candidates[j].position, radius) > iou_threshold) {
        removed[j] = true;
      }
    }
  }
  return out;
}

Path complete_trajectory(const Point & endpoint, const EndpointComponent & component)
{
  const std::size_t T = component.mean.size();
  const Eigen::LLT<Eigen::Matrix2d> final_llt(component.cov[T - 1]);
  if (final_llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kInternal, "final endpoint covariance is not positive definite");
  }
  const Eigen::Vector2d u = final_llt.matrixL().solve(endpoint - component.mean[T - 1]);
  Path out;
  out.reserve(T);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const Eigen::LLT<Eigen::Matrix2d> llt(component.cov[t]);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::kInternal, "endpoint covariance is not positive definite");
    }
    out.push_back(component.mean[t] + llt.matrixL() * u);
  }
  out.push_back(endpoint);
  return out;
}

std::size_t responsible_component(const EndpointDistribution & d, const Point & p)
{
  const std::size_t last = static_cast<std::size_t>(d.steps() - 1);
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t c = 0; c < d.components.size(); ++c) {
    const auto & comp = d.components[c];
    const double v = comp.weight * gaussian2_density(p, comp.mean[last], comp.cov[last]);
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

void validate(const SamplingConfig & c)
{
  if (c.M < 1) throw invalid_config("M must be >= 1");
  if (!(c.radius > 0.0)) throw invalid_config("radius must be > 0");
  if (!(c.iou_threshold >= 0.0 && c.iou_threshold <= 1.0)) {
    throw invalid_config("iou threshold must lie in [0, 1]");
  }
  if (!(c.resolution > 0.0)) throw invalid_config("resolution must be > 0");
  if (!(c.n_sigma > 0.0)) throw invalid_config("n_sigma must be > 0");
  if (c.top_c < 1) throw invalid_config("top_c must be >= 1");
}

PredictionSet predict_top_m(const Model & m, const PreparedScene & scene, const SamplingConfig & config)
{
  validate(config);
  const Eigen::VectorXd x = encode_scene(m, scene);
  const EndpointDistribution d = endpoint_distribution(m, x, std::min(config.top_c, m.mixture().K));
  const std::vector<Candidate> chosen =
    nms_select(dense_grid(d, config.resolution, config.n_sigma), config.radius, config.iou_threshold, config.M);
  PredictionSet out;
  out.scene_id = scene.scene_id;
  out.exhausted = static_cast<int>(chosen.size()) < config.M;
  for (const auto & cand : chosen) {
    const std::size_t c = responsible_component(d, cand.position);
    out.trajectories.push_back(
      from_target_frame(complete_trajectory(cand.position, d.components[c]), scene.pose));
    out.scores.push_back(cand.score);
    out.component_of.push_back(d.components[c].component);
  }
  return out;
}

}  // namespace vbmix
