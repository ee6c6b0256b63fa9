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

#include "vbmix/evaluation.hpp"

#include "vbmix/error.hpp"

#include <json.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace vbmix
{

namespace
{

const double kLog2PiE = std::log(2.0 * std::numbers::pi * std::numbers::e);

constexpr double kLateralThreshold = 1.0;    // m
constexpr double kArgoverseThreshold = 2.0;  // m

void check_lengths(const std::vector<Path> & predictions, const Path & gt)
{
  if (predictions.empty()) {
    throw invalid_input("at least one prediction is required");
  }
  if (gt.empty()) {
    throw invalid_input("ground truth is empty");
  }
  for (const auto & p : predictions) {
    if (p.size() != gt.size()) {
      throw invalid_input(
        "prediction length " + std::to_string(p.size()) + " != ground truth length " +
        std::to_string(gt.size()));
    }
  }
}

double log_gaussian2(const Eigen::Vector2d & p, const Eigen::Vector2d & mean, const Eigen::Matrix2d & cov)
{
  const Eigen::LLT<Eigen::Matrix2d> llt(cov);
  const Eigen::Vector2d z = llt.matrixL().solve(p - mean);
  const Eigen::Matrix2d & l = llt.matrixLLT();
  return -0.5 * z.squaredNorm() - std::log(l(0, 0)) - std::log(l(1, 1)) -
         std::log(2.0 * std::numbers::pi);
}

}  // namespace

double gaussian_entropy(const Eigen::VectorXd & log_factor_diagonal)
{
  return 0.5 * static_cast<double>(log_factor_diagonal.size()) * kLog2PiE + log_factor_diagonal.sum();
}

double gaussian_entropy(const Eigen::MatrixXd & factor)
{
  return gaussian_entropy(Eigen::VectorXd(factor.diagonal().array().abs().log()));
}

EntropyReport total_entropy(const Model & m, const Eigen::VectorXd & x, int n_mc, std::mt19937_64 & rng)
{
  if (n_mc < 1) {
    throw invalid_input("n_mc must be >= 1");
  }
  const MixtureConfig & c = m.mixture();
  std::normal_distribution<double> normal(0.0, 1.0);
  ad::Tape t(m.store, false);
  const ad::Var xr = t.constant(x.transpose().replicate(n_mc, 1));
  EntropyReport r;
  for (int k = 0; k < c.K; ++k) {
    std::vector<ad::Matrix> eps;
    for (int s = 0; s < c.T; ++s) {
      ad::Matrix e(n_mc, c.d_v);
      for (int j = 0; j < n_mc; ++j) {
        for (int d = 0; d < c.d_v; ++d) {
          e(j, d) = normal(rng);
        }
      }
      eps.push_back(std::move(e));
    }
    const PriorRollout roll = prior_rollout_graph(t, m, xr, k, eps);
    double term_v = 0.0;
    for (const auto & ls : roll.p.log_std) {
      term_v += c.T > 0 ? ls.value().rowwise().sum().mean() : 0.0;
    }
    term_v += 0.5 * c.d_v * kLog2PiE * c.T;
    const ad::Matrix dec = decode_graph(t, m, xr, roll.v).value();
    const double term_s =
      (dec.col(2) + dec.col(4)).sum() / static_cast<double>(n_mc) + kLog2PiE * c.T;
    r.term_v += term_v / c.K;
    r.term_s += term_s / c.K;
  }
  r.term_z = std::log(static_cast<double>(c.K));
  r.total = r.term_s + r.term_v + r.term_z;
  return r;
}

OodReport ood_report(const Model & m, const std::vector<PreparedScene> & scenes, int n_mc, std::uint64_t seed)
{
  OodReport r;
  std::map<std::pair<std::string, bool>, std::vector<double>> groups;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::seed_seq seq{
      static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    const double h = total_entropy(m, encode_scene(m, scenes[i]), n_mc, rng).total;
    r.scene_entropy.push_back(h);
    groups[{scenes[i].meta.geometry, scenes[i].meta.ood}].push_back(h);
  }
  std::map<std::string, std::pair<const EntropyGroup *, const EntropyGroup *>> by_geometry;
  for (const auto & [key, values] : groups) {
    EntropyGroup g;
    g.geometry = key.first;
    g.ood = key.second;
    g.n = static_cast<int>(values.size());
    for (double v : values) {
      g.mean += v / g.n;
    }
    if (g.n > 1) {
      double ss = 0.0;
      for (double v : values) {
        ss += (v - g.mean) * (v - g.mean);
      }
      g.std = std::sqrt(ss / (g.n - 1));
    }
    r.groups.push_back(g);
  }
  for (const auto & g : r.groups) {
    auto & slot = by_geometry[g.geometry];
    (g.ood ? slot.second : slot.first) = &g;
  }
  for (const auto & [geometry, pair] : by_geometry) {
    if (!pair.first || !pair.second) {
      r.notices.push_back(
        "geometry " + geometry + ": no " + (pair.first ? "OOD" : "ID") + " scenes, change omitted");
      continue;
    }
    EntropyChange ch;
    ch.geometry = geometry;
    ch.id_mean = pair.first->mean;
    ch.ood_mean = pair.second->mean;
    ch.percent = 100.0 * (ch.ood_mean - ch.id_mean) / std::abs(ch.id_mean);
    r.changes.push_back(ch);
  }
  return r;
}

std::string format_ood_report(const OodReport & r)
{
  nlohmann::ordered_json j;
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto & g : r.groups) {
    j["groups"].push_back({{"geometry", g.geometry}, {"split", g.ood ? "ood" : "id"}, {"n", g.n},
                           {"mean_entropy", g.mean}, {"std_entropy", g.std}});
  }
  j["changes"] = nlohmann::ordered_json::array();
  for (const auto & c : r.changes) {
    j["changes"].push_back({{"geometry", c.geometry}, {"id_mean", c.id_mean},
                            {"ood_mean", c.ood_mean}, {"percent_change", c.percent}});
  }
  j["notices"] = r.notices;
  return j.dump(2) + "\n";
}

double min_ade(const std::vector<Path> & predictions, const Path & gt)
{
  check_lengths(predictions, gt);
  double best = HUGE_VAL;
  for (const auto & p : predictions) {
    double sum = 0.0;
    for (std::size_t t = 0; t < gt.size(); ++t) {
      sum += (p[t] - gt[t]).norm();
    }
    best = std::min(best, sum / static_cast<double>(gt.size()));
  }
  return best;
}

double min_fde(const std::vector<Path> & predictions, const Path & gt)
{
  check_lengths(predictions, gt);
  double best = HUGE_VAL;
  for (const auto & p : predictions) {
    best = std::min(best, (p.back() - gt.back()).norm());
  }
  return best;
}

double threshold_lon(double v)
{
  if (v < 1.4) {
    return 1.0;
  }
  if (v <= 11.0) {
    return 1.0 + (v - 1.4) / (11.0 - 1.4);
  }
  return 2.0;
}

bool miss_interaction(const std::vector<Path> & predictions, const Path & gt, double final_yaw, double speed)
{
  check_lengths(predictions, gt);
  const double c = std::cos(final_yaw), s = std::sin(final_yaw);
  const double lon_tol = threshold_lon(speed);
  for (const auto & p : predictions) {
    const Point d = p.back() - gt.back();
    const double lon = c * d.x() + s * d.y();
    const double lat = -s * d.x() + c * d.y();
    if (std::abs(lon) <= lon_tol && std::abs(lat) <= kLateralThreshold) {
      return false;
    }
  }
  return true;
}

bool miss_argoverse(const std::vector<Path> & predictions, const Path & gt)
{
  check_lengths(predictions, gt);
  for (const auto & p : predictions) {
    if ((p.back() - gt.back()).norm() <= kArgoverseThreshold) {
      return false;
    }
  }
  return true;
}

FinalKinematics final_kinematics(const Path & gt, const Point & anchor, double step_seconds)
{
  if (gt.empty()) {
    throw invalid_input("ground truth is empty");
  }
  const Point prev = gt.size() > 1 ? gt[gt.size() - 2] : anchor;
  const Point d = gt.back() - prev;
  return FinalKinematics{std::atan2(d.y(), d.x()), d.norm() / step_seconds};
}

MissRateKind parse_miss_rate(const std::string & s)
{
  if (s == "interaction") return MissRateKind::kInteraction;
  if (s == "argoverse") return MissRateKind::kArgoverse;
  throw invalid_config("unknown miss-rate definition \"" + s + "\" (interaction, argoverse)");
}

std::string to_string(MissRateKind kind)
{
  return kind == MissRateKind::kInteraction ? "interaction" : "argoverse";
}

MetricsReport evaluate_predictions(
  const std::vector<std::vector<Path>> & predictions, const std::vector<Scene> & scenes,
  double step_seconds, MissRateKind kind)
{
  if (predictions.size() != scenes.size()) {
    throw invalid_input("prediction and scene counts differ");
  }
  MetricsReport r;
  r.n_scenes = static_cast<int>(scenes.size());
  if (scenes.empty()) {
    return r;
  }
  double misses = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene & s = scenes[i];
    if (!s.future) {
      throw invalid_input("scene " + s.scene_id + " has no ground-truth future");
    }
    const auto & preds = predictions[i];
    r.min_ade += min_ade(preds, *s.future);
    r.min_fde += min_fde(preds, *s.future);
    bool miss = false;
    if (kind == MissRateKind::kArgoverse) {
      miss = miss_argoverse(preds, *s.future);
    } else {
      const FinalKinematics k =
        final_kinematics(*s.future, s.target.states.back().position(), step_seconds);
      miss = miss_interaction(preds, *s.future, k.yaw, k.speed);
    }
    misses += miss ? 1.0 : 0.0;
    r.k_used = std::max(r.k_used, static_cast<int>(preds.size()));
  }
  const double n = static_cast<double>(scenes.size());
  r.min_ade /= n;
  r.min_fde /= n;
  r.miss_rate = misses / n;
  return r;
}

std::string format_metrics_report(const MetricsReport & r, MissRateKind kind)
{
  nlohmann::ordered_json j{
    {"min_ade", r.min_ade}, {"min_fde", r.min_fde}, {"miss_rate", r.miss_rate},
    {"miss_rate_definition", to_string(kind)}, {"n_scenes", r.n_scenes}, {"k_used", r.k_used},
  };
  return j.dump(2) + "\n";
}

Path constant_velocity(const Scene & scene, int T, double step_seconds)
{
  if (scene.target.states.empty()) {
    throw invalid_input("target track is empty");
  }
  const MotionState & last = scene.target.states.back();
  Path out;
  for (int t = 1; t <= T; ++t) {
    out.push_back(last.position() + last.velocity() * (t * step_seconds));
  }
  return out;
}

Heatmap heatmap(const EndpointDistribution & d, const Region & region, double resolution)
{
  if (!(resolution > 0.0)) {
    throw invalid_input("heatmap resolution must be > 0");
  }
  if (!(region.x_max >= region.x_min) || !(region.y_max >= region.y_min)) {
    throw invalid_input("heatmap region is empty");
  }
  Heatmap h;
  h.region = region;
  h.resolution = resolution;
  h.nx = grid_count(region.x_min, region.x_max, resolution);
  h.ny = grid_count(region.y_min, region.y_max, resolution);
  h.values.reserve(static_cast<std::size_t>(h.nx) * static_cast<std::size_t>(h.ny));
  const int T = d.steps();
  std::vector<double> terms(d.components.size());
  for (int iy = 0; iy < h.ny; ++iy) {
    for (int ix = 0; ix < h.nx; ++ix) {
      const Eigen::Vector2d g(region.x_min + ix * resolution, region.y_min + iy * resolution);
      double best = -HUGE_VAL;
      for (int t = 0; t < T; ++t) {
        // log sum_c w_c N(.) with the largest term factored out
        double mx = -HUGE_VAL;
        for (std::size_t c = 0; c < d.components.size(); ++c) {
          const auto & comp = d.components[c];
          terms[c] = std::log(comp.weight) +
                     log_gaussian2(g, comp.mean[static_cast<std::size_t>(t)], comp.cov[static_cast<std::size_t>(t)]);
          mx = std::max(mx, terms[c]);
        }
        double sum = 0.0;
        for (double v : terms) {
          sum += std::exp(v - mx);
        }
        best = std::max(best, mx + std::log(sum));
      }
      h.values.push_back(best);
    }
  }
  return h;
}

std::string format_heatmap(const Heatmap & h)
{
  std::string out;
  char buf[128];
  out += "# vbmix heatmap: log-density, row-major, rows ascend in y\n";
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g\n", h.region.x_min, h.region.x_max,
                h.region.y_min, h.region.y_max);
  out += "region ";
  out += buf;
  std::snprintf(buf, sizeof(buf), "resolution %.17g\n", h.resolution);
  out += buf;
  out += "size " + std::to_string(h.nx) + " " + std::to_string(h.ny) + "\n";
  for (int iy = 0; iy < h.ny; ++iy) {
    for (int ix = 0; ix < h.nx; ++ix) {
      std::snprintf(buf, sizeof(buf), "%.9g", h.at(ix, iy));
      if (ix > 0) {
        out += ' ';
      }
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string render_heatmap_ppm(const Heatmap & h)
{
  double hi = -HUGE_VAL;
  for (double v : h.values) {
    hi = std::max(hi, v);
  }
  constexpr double kRange = 20.0;  // nats shown below the peak
  std::string out = "P6\n" + std::to_string(h.nx) + " " + std::to_string(h.ny) + "\n255\n";
  for (int iy = h.ny - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < h.nx; ++ix) {
      const double u = std::clamp((h.at(ix, iy) - (hi - kRange)) / kRange, 0.0, 1.0);
      out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * u)));
      out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * u * u)));
      out += static_cast<char>(static_cast<unsigned char>(std::lround(80.0 * (1.0 - u))));
    }
  }
  return out;
}

}  // namespace vbmix
