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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Pass criterion numbers as arguments to
// run a subset. Criteria 7-9 drive the command-line tool named by VBMIX_CLI.

#include "vbmix/error.hpp"
#include "vbmix/evaluation.hpp"
#include "vbmix/sampling.hpp"
#include "vbmix/synthetic.hpp"
#include "vbmix/training.hpp"

#include "unit/helpers.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <numeric>
#include <set>

using namespace vbmix;
using Eigen::Matrix2d;
using Eigen::Vector2d;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace
{

// Tolerances and budgets.
constexpr double kClosedFormTol = 1e-9;
constexpr int kKlPairs = 100000;
constexpr double kClosedFormSeconds = 10.0;
constexpr double kGradTolFull = 1e-4;
constexpr double kGradTolLinear = 1e-6;
constexpr double kGradSeconds = 60.0;
constexpr int kElboDraws = 100;
constexpr double kElboSlack = 1e-6;
constexpr double kElboSeconds = 60.0;
constexpr int kMcSmall = 10000;
constexpr int kMcReference = 1000000;
constexpr double kMcStandardErrors = 3.0;
constexpr int kPropertyTrials = 1000;
constexpr double kCompletionTol = 1e-12;
constexpr double kMetricTol = 1e-12;
constexpr double kFdeMargin = 0.7;  // at least 30% below the baseline
constexpr double kMaxMissRate = 0.10;
constexpr int kOodSeedsNeeded = 2;

struct Outcome
{
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4)
{
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

GaussianDiag diag1(double mean, double var)
{
  return GaussianDiag{VectorXd::Constant(1, mean), VectorXd::Constant(1, 0.5 * std::log(var))};
}

VectorXd vec(std::initializer_list<double> v)
{
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// ---------------------------------------------------------------------------
// 1. Closed forms.

Outcome closed_forms()
{
  const auto start = Clock::now();
  double worst = 0.0;
  auto expect = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

  expect(kl_diag(diag1(0.3, 2.0), diag1(0.3, 2.0)), 0.0);
  expect(kl_diag(diag1(1.0, 1.0), diag1(0.0, 1.0)), 0.5);
  expect(kl_diag(diag1(0.0, 4.0), diag1(0.0, 1.0)), 0.5 * (4.0 - 1.0 - std::log(4.0)));

  const VectorXd u6 = VectorXd::Constant(6, 1.0 / 6.0);
  VectorXd one_hot = VectorXd::Zero(6);
  one_hot(0) = 1.0;
  expect(kl_categorical(u6, u6), 0.0);
  expect(kl_categorical(one_hot, u6), std::log(6.0));
  expect(kl_categorical(vec({0.5, 0.5}), vec({0.25, 0.75})), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0));

  const double log_2pie = std::log(2.0 * std::numbers::pi * std::numbers::e);
  const VectorXd zero1 = VectorXd::Zero(1), zero2 = VectorXd::Zero(2);
  const VectorXd doubled = VectorXd::Constant(2, std::log(2.0));
  expect(gaussian_entropy(zero2), log_2pie);
  expect(gaussian_entropy(doubled) - gaussian_entropy(zero2), std::log(4.0));
  expect(gaussian_entropy(zero1), 0.5 * log_2pie);

  const double lens = 2.0 * std::acos(0.5) - 0.5 * std::sqrt(3.0);
  expect(circle_iou(Point(0, 0), Point(0, 0), 1.4), 1.0);
  expect(circle_iou(Point(0, 0), Point(2.8, 0), 1.4), 0.0);
  expect(circle_iou(Point(0, 0), Point(7, 1), 1.4), 0.0);
  expect(circle_iou(Point(0, 0), Point(1, 0), 1.0), lens / (2.0 * std::numbers::pi - lens));

  expect(focal_loss(vec({0.5, 0.5}), vec({1.0, 0.0}), 0.0), std::log(2.0));
  expect(focal_loss(vec({0.5, 0.5}), vec({1.0, 0.0}), 2.0), 0.25 * std::log(2.0));
  expect(focal_loss(vec({0.0, 1.0}), vec({0.0, 1.0}), 2.0), 0.0);

  std::mt19937_64 rng(101);
  std::gamma_distribution<double> gamma(0.5, 1.0);
  int negative = 0;
  for (int i = 0; i < kKlPairs; ++i) {
    const GaussianDiag q{test::random_matrix(4, 1, rng, 2.0), test::random_matrix(4, 1, rng)};
    const GaussianDiag p{test::random_matrix(4, 1, rng, 2.0), test::random_matrix(4, 1, rng)};
    VectorXd a(5), b(5);
    for (int k = 0; k < 5; ++k) {
      a(k) = gamma(rng) + 1e-9;
      b(k) = gamma(rng) + 1e-9;
    }
    negative += kl_diag(q, p) < 0.0;
    negative += kl_categorical(a / a.sum(), b / b.sum()) < 0.0;
  }
  const double secs = seconds_since(start);
  return {worst <= kClosedFormTol && negative == 0 && secs < kClosedFormSeconds,
          "max error " + fmt(worst) + ", negative KL " + std::to_string(negative) + "/" +
            std::to_string(2 * kKlPairs) + ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Gradients.

bool is_encoder(const std::string & name) { return name.rfind("enc.", 0) == 0; }

// Total loss with frozen noise and targets. Scenes use the generator's default
// step length with futures cut to the toy horizon.
GradCheckResult full_model_check(int d_model)
{
  const ModelConfig c = test::toy_config(2, 2, 3, d_model);
  Model m = Model::create(c);
  GeneratorConfig g = test::toy_generator(2, 12);
  g.step_seconds = GeneratorConfig{}.step_seconds;
  std::vector<Scene> scenes = generate_dataset(g);
  for (auto & s : scenes) s.future->resize(3);
  const auto prepared = test::prepared(scenes, c);
  const auto batch = test::pointers(prepared);
  std::mt19937_64 rng(202);
  LossOptions o;
  o.n_mc = 2;
  const BatchNoise noise = draw_noise(3, 2 * o.n_mc, 2, rng);
  ad::Matrix targets;
  {
    ad::Tape t(m.store, false);
    targets = loss_graph(t, m, batch, noise, o).targets;
  }
  o.frozen_targets = &targets;
  return grad_check(
    m, [&](ad::Tape & t, const Model & model) { return loss_graph(t, model, batch, noise, o).total; }, {});
}

// Affine decoder on fixed latent samples: the log-likelihood of the future.
GradCheckResult linear_decoder_check()
{
  ModelConfig c = test::toy_config(2, 2, 3, 8);
  c.mixture.decoder_hidden_layers = 0;
  Model m = Model::create(c);
  std::mt19937_64 rng(203);
  const ad::Matrix x = test::random_matrix(4, 8, rng);
  std::vector<ad::Matrix> v, s;
  for (int t = 0; t < 3; ++t) {
    v.push_back(test::random_matrix(4, 2, rng));
    s.push_back(test::random_matrix(4, 2, rng));
  }
  ad::Matrix s_stacked(12, 2);
  for (int t = 0; t < 3; ++t) s_stacked.middleRows(4 * t, 4) = s[static_cast<std::size_t>(t)];
  GradCheckOptions o;
  o.step = 1e-4;
  o.filter = [](const std::string & n) { return n.rfind("dec.", 0) == 0; };
  return grad_check(
    m,
    [&](ad::Tape & t, const Model & model) {
      std::vector<ad::Var> vv;
      for (const auto & block : v) vv.push_back(t.constant(block));
      const ad::Var decoded = decode_graph(t, model, t.constant(x), vv);
      return ad::neg(ad::sum(gaussian2_log_density(decoded, t.constant(s_stacked))));
    },
    o);
}

Outcome gradients()
{
  const auto start = Clock::now();
  const GradCheckResult full8 = full_model_check(8);
  const GradCheckResult full16 = full_model_check(16);
  const GradCheckResult linear = linear_decoder_check();
  const double secs = seconds_since(start);
  const bool pass = full8.max_rel_error <= kGradTolFull && full16.max_rel_error <= kGradTolFull &&
                    linear.max_rel_error <= kGradTolLinear && full8.checked > 0 && full16.checked > 0 &&
                    linear.checked > 0 && secs < kGradSeconds;
  return {pass, "full d_model 8 " + fmt(full8.max_rel_error, 3) + " (" + full8.worst_parameter + "), d_model 16 " +
                  fmt(full16.max_rel_error, 3) + " (" + full16.worst_parameter + "), linear decoder " +
                  fmt(linear.max_rel_error, 3) + ", " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 3. ELBO against the quadrature log-likelihood.

constexpr int kQuadNodes = 4001;
constexpr double kQuadHalfWidth = 12.0;

// Trapezoid nodes and weights for a standard normal expectation.
void normal_quadrature(std::vector<double> & nodes, std::vector<double> & weights)
{
  const double h = 2.0 * kQuadHalfWidth / (kQuadNodes - 1);
  nodes.resize(kQuadNodes);
  weights.resize(kQuadNodes);
  for (int i = 0; i < kQuadNodes; ++i) {
    const double u = -kQuadHalfWidth + i * h;
    nodes[static_cast<std::size_t>(i)] = u;
    weights[static_cast<std::size_t>(i)] = h * std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  }
}

double log_sum_exp(const std::vector<double> & v)
{
  const double top = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

// log N(s; mean, L L^T) written out for a 2x2 lower-triangular factor.
double log_density_factor(const Vector2d & s, const Gaussian2Full & g)
{
  const double l11 = std::exp(g.log_l11), l22 = std::exp(g.log_l22);
  const double z1 = (s.x() - g.mean.x()) / l11;
  const double z2 = (s.y() - g.mean.y() - g.l21 * z1) / l22;
  return -std::log(2.0 * std::numbers::pi) - g.log_l11 - g.log_l22 - 0.5 * (z1 * z1 + z2 * z2);
}

Outcome elbo_bound()
{
  const auto start = Clock::now();
  std::vector<double> nodes, weights;
  normal_quadrature(nodes, weights);
  std::mt19937_64 rng(303);
  std::normal_distribution<double> jitter(0.0, 0.2);
  double worst_gap = -1e300;
  std::vector<double> gaps;
  for (int draw = 0; draw < kElboDraws; ++draw) {
    ModelConfig c = test::toy_config(2, 1, 1, 8);
    c.init_seed = static_cast<std::uint64_t>(draw);
    Model m = Model::create(c);
    for (auto & p : m.store.all()) {
      if (!is_encoder(p.name)) {
        p.value = p.value.unaryExpr([&](double w) { return w + jitter(rng); });
      }
    }
    const ad::Matrix x_row = test::random_matrix(1, 8, rng);
    const VectorXd x = x_row.transpose();
    const ad::Matrix future = test::random_matrix(1, 2, rng, 2.0);

    // Expected ELBO: the posterior noise rows are the quadrature nodes.
    ad::Matrix eps(kQuadNodes, 1);
    for (int i = 0; i < kQuadNodes; ++i) eps(i, 0) = nodes[static_cast<std::size_t>(i)];
    double elbo = 0.0;
    {
      ad::Tape t(m.store, false);
      LossOptions o;
      o.n_mc = kQuadNodes;
      const LossGraph g = loss_graph_from_context(t, m, t.constant(x_row), {&future}, {eps}, o);
      const ad::Matrix & rows = g.elbo_rows.value();
      for (int i = 0; i < kQuadNodes; ++i) elbo += weights[static_cast<std::size_t>(i)] * rows(i, 0);
    }

    // log p(s|x) = log sum_k (1/K) E_{v ~ p_k}[p(s|v)].
    std::vector<double> terms;
    for (int k = 0; k < c.mixture.K; ++k) {
      const GaussianDiag p = prior_rollout(m, x, k).front();
      for (int i = 0; i < kQuadNodes; ++i) {
        const VectorXd v = VectorXd::Constant(1, p.mean(0) + std::exp(p.log_std(0)) * nodes[static_cast<std::size_t>(i)]);
        terms.push_back(std::log(weights[static_cast<std::size_t>(i)] / c.mixture.K) +
                        log_density_factor(future.row(0).transpose(), decode_step(m, v, x)));
      }
    }
    const double log_lik = log_sum_exp(terms);
    worst_gap = std::max(worst_gap, elbo - log_lik);
    gaps.push_back(elbo - log_lik);
  }
  std::nth_element(gaps.begin(), gaps.begin() + kElboDraws / 2, gaps.end());
  const double secs = seconds_since(start);
  return {worst_gap <= kElboSlack && secs < kElboSeconds,
          "max ELBO - log p " + fmt(worst_gap) + " over " + std::to_string(kElboDraws) + " draws (median " +
            fmt(gaps[kElboDraws / 2]) + "), " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 4. Monte-Carlo consistency of the weighted-KL term.

struct McEstimate
{
  double mean = 0.0;
  double standard_error = 0.0;
};

McEstimate term2_estimate(const Model & m, const ad::Matrix & x, const ad::Matrix & future, int n, std::uint64_t seed)
{
  constexpr int kChunk = 10000;
  std::mt19937_64 rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (int done = 0; done < n; done += kChunk) {
    const int rows = std::min(kChunk, n - done);
    LossOptions o;
    o.n_mc = rows;
    const BatchNoise noise = draw_noise(m.mixture().T, rows, m.mixture().d_v, rng);
    ad::Tape t(m.store, false);
    const LossGraph g = loss_graph_from_context(t, m, t.constant(x), {&future}, noise, o);
    const ad::Matrix & r = g.term2_rows.value();
    sum += r.sum();
    sum_sq += r.squaredNorm();
  }
  const double mean = sum / n;
  const double var = (sum_sq - n * mean * mean) / (n - 1);
  return {mean, std::sqrt(var / n)};
}

Outcome mc_consistency()
{
  const auto start = Clock::now();
  ModelConfig c = test::toy_config(2, 2, 3, 8);
  c.init_seed = 404;
  Model m = Model::create(c);
  std::mt19937_64 rng(404);
  for (auto & p : m.store.all()) {
    p.value += test::random_matrix(p.value.rows(), p.value.cols(), rng, 0.3);
  }
  const ad::Matrix x = test::random_matrix(1, 8, rng);
  const ad::Matrix future = test::random_matrix(3, 2, rng, 1.5);
  const McEstimate small = term2_estimate(m, x, future, kMcSmall, 1);
  const McEstimate reference = term2_estimate(m, x, future, kMcReference, 2);
  const double z = std::abs(small.mean - reference.mean) / small.standard_error;
  return {z <= kMcStandardErrors,
          "n_mc 1e4 " + fmt(small.mean, 6) + " (SE " + fmt(small.standard_error, 3) + "), n_mc 1e6 " +
            fmt(reference.mean, 6) + ", |diff| = " + fmt(z, 3) + " SE, " + fmt(seconds_since(start), 3) + " s"};
}

// ---------------------------------------------------------------------------
// 5. Destination sampling geometry.

bool ranks_before(const Candidate & a, const Candidate & b)
{
  if (a.score != b.score) return a.score > b.score;
  if (a.position.x() != b.position.x()) return a.position.x() < b.position.x();
  return a.position.y() < b.position.y();
}

bool same(const Candidate & a, const Candidate & b) { return a.position == b.position && a.score == b.score; }

Outcome nms_and_completion()
{
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> coord(-6.0, 6.0), unit(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 50), pick_m(1, 8);
  int nms_failures = 0;
  for (int trial = 0; trial < kPropertyTrials; ++trial) {
    std::vector<Candidate> cands(static_cast<std::size_t>(count(rng)));
    for (auto & c : cands) {
      // Coarse coordinates and scores produce ties and coincident points.
      c.position = Point(std::round(coord(rng) * 2.0) / 2.0, std::round(coord(rng) * 2.0) / 2.0);
      c.score = std::round(unit(rng) * 20.0) / 20.0;
    }
    const double radius = 0.5 + 1.5 * unit(rng);
    const double threshold = trial % 2 == 0 ? 0.0 : 0.5 * unit(rng);
    const int M = pick_m(rng);
    const auto out = nms_select(cands, radius, threshold, M);

    bool ok = !out.empty() && static_cast<int>(out.size()) <= M;
    for (std::size_t i = 0; i + 1 < out.size(); ++i) ok = ok && !ranks_before(out[i + 1], out[i]);
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        ok = ok && circle_iou(out[i].position, out[j].position, radius) <= threshold;
      }
    }
    if (static_cast<int>(out.size()) < M) {
      for (const auto & c : cands) {
        bool covered = false;
        for (const auto & s : out) {
          covered = covered || same(s, c) ||
                    (!ranks_before(c, s) && circle_iou(s.position, c.position, radius) > threshold);
        }
        ok = ok && covered;
      }
    }
    std::vector<Candidate> shuffled = cands;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto again = nms_select(shuffled, radius, threshold, M);
    ok = ok && again.size() == out.size();
    for (std::size_t i = 0; ok && i < out.size(); ++i) ok = same(again[i], out[i]);
    nms_failures += !ok;
  }

  int completion_failures = 0;
  double worst_end = 0.0, worst_mean = 0.0;
  for (int trial = 0; trial < kPropertyTrials; ++trial) {
    const int T = 1 + trial % 12;
    std::vector<Vector2d> step_mean;
    std::vector<Matrix2d> step_cov;
    for (int t = 0; t < T; ++t) {
      step_mean.emplace_back(test::random_matrix(2, 1, rng, 2.0));
      const Matrix2d a = test::random_matrix(2, 2, rng);
      step_cov.push_back(a * a.transpose() + 0.05 * Matrix2d::Identity());
    }
    const EndpointComponent c = accumulate_steps(0, 1.0, step_mean, step_cov);
    const Point y = c.mean.back() + Vector2d(test::random_matrix(2, 1, rng, 3.0));
    const Path path = complete_trajectory(y, c);
    const Path mean_path = complete_trajectory(c.mean.back(), c);
    const double end = (path.back() - y).cwiseAbs().maxCoeff();
    double mean_err = 0.0;
    for (int t = 0; t < T; ++t) {
      mean_err = std::max(mean_err, (mean_path[static_cast<std::size_t>(t)] - c.mean[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff());
    }
    worst_end = std::max(worst_end, end);
    worst_mean = std::max(worst_mean, mean_err);
    completion_failures += static_cast<int>(path.size()) != T || end > kCompletionTol || mean_err > kCompletionTol;
  }
  return {nms_failures == 0 && completion_failures == 0,
          "NMS violations " + std::to_string(nms_failures) + "/" + std::to_string(kPropertyTrials) +
            ", completion endpoint error " + fmt(worst_end, 3) + ", u=0 path error " + fmt(worst_mean, 3)};
}

// ---------------------------------------------------------------------------
// 6. Metric oracles.

double oracle_ade(const std::vector<Path> & preds, const Path & gt)
{
  double best = 1e300;
  for (const auto & p : preds) {
    double total = 0.0;
    for (std::size_t t = 0; t < gt.size(); ++t) total += std::hypot(p[t][0] - gt[t][0], p[t][1] - gt[t][1]);
    best = std::min(best, total / static_cast<double>(gt.size()));
  }
  return best;
}

double oracle_fde(const std::vector<Path> & preds, const Path & gt)
{
  double best = 1e300;
  for (const auto & p : preds) best = std::min(best, std::hypot(p.back()[0] - gt.back()[0], p.back()[1] - gt.back()[1]));
  return best;
}

bool oracle_miss_argoverse(const std::vector<Path> & preds, const Path & gt)
{
  return std::all_of(preds.begin(), preds.end(), [&](const Path & p) {
    return std::hypot(p.back()[0] - gt.back()[0], p.back()[1] - gt.back()[1]) > 2.0;
  });
}

bool oracle_miss_interaction(const std::vector<Path> & preds, const Path & gt, double yaw, double v)
{
  const double lon_tol = v < 1.4 ? 1.0 : (v <= 11.0 ? 1.0 + (v - 1.4) / 9.6 : 2.0);
  return std::all_of(preds.begin(), preds.end(), [&](const Path & p) {
    const double dx = p.back()[0] - gt.back()[0], dy = p.back()[1] - gt.back()[1];
    const double lon = std::cos(yaw) * dx + std::sin(yaw) * dy;
    const double lat = -std::sin(yaw) * dx + std::cos(yaw) * dy;
    return std::abs(lon) > lon_tol || std::abs(lat) > 1.0;
  });
}

Outcome metric_oracles()
{
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> pick_m(1, 6), pick_t(1, 30);
  std::uniform_real_distribution<double> yaw(-3.2, 3.2), speed(0.0, 15.0);
  std::normal_distribution<double> n(0.0, 1.0);
  int mismatches = 0;
  double worst = 0.0;
  for (int trial = 0; trial < kPropertyTrials; ++trial) {
    const int T = pick_t(rng);
    Path gt;
    for (int t = 0; t < T; ++t) gt.emplace_back(3.0 * n(rng), 3.0 * n(rng));
    std::vector<Path> preds;
    for (int i = 0, M = pick_m(rng); i < M; ++i) {
      Path p = gt;
      for (auto & q : p) q += Vector2d(1.5 * n(rng), 1.5 * n(rng));
      preds.push_back(std::move(p));
    }
    const double h = yaw(rng), v = speed(rng);
    const double ade_err = std::abs(min_ade(preds, gt) - oracle_ade(preds, gt));
    const double fde_err = std::abs(min_fde(preds, gt) - oracle_fde(preds, gt));
    worst = std::max({worst, ade_err, fde_err});
    mismatches += ade_err > kMetricTol || fde_err > kMetricTol ||
                  miss_argoverse(preds, gt) != oracle_miss_argoverse(preds, gt) ||
                  miss_interaction(preds, gt, h, v) != oracle_miss_interaction(preds, gt, h, v);
  }
  const bool continuous = threshold_lon(1.4) == 1.0 && threshold_lon(std::nextafter(1.4, 0.0)) == 1.0 &&
                          threshold_lon(11.0) == 2.0 && threshold_lon(std::nextafter(11.0, 20.0)) == 2.0 &&
                          1.0 + (1.4 - 1.4) / 9.6 == 1.0 && 1.0 + (11.0 - 1.4) / 9.6 == 2.0;
  return {mismatches == 0 && continuous,
          "mismatches " + std::to_string(mismatches) + "/" + std::to_string(kPropertyTrials) + ", max error " +
            fmt(worst, 3) + ", threshold continuous at 1.4 and 11: " + (continuous ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// End-to-end criteria through the command-line tool.

struct Cli
{
  std::string binary;
  fs::path log;

  std::string run(const std::vector<std::string> & args) const
  {
    std::string command = "'" + binary + "'";
    for (const auto & a : args) command += " '" + a + "'";
    command += " 2>>'" + log.string() + "'";
    FILE * pipe = ::popen(command.c_str(), "r");
    if (!pipe) throw std::runtime_error("cannot start " + binary);
    std::string out;
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, got);
    const int status = ::pclose(pipe);
    if (status != 0) {
      throw std::runtime_error(command + " failed with status " + std::to_string(status) + "; see " + log.string());
    }
    return out;
  }
};

Cli make_cli(const fs::path & dir)
{
  const char * bin = std::getenv("VBMIX_CLI");
  if (!bin || !*bin) throw std::runtime_error("VBMIX_CLI is not set");
  fs::create_directories(dir);
  return Cli{bin, dir / "stderr.log"};
}

fs::path fresh(const fs::path & p)
{
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const fs::path kWork = fs::current_path() / "acceptance_work";

// 7. Fork training: K=2 against the baseline and against K=1.
Outcome fork_training()
{
  const auto start = Clock::now();
  const fs::path dir = fresh(kWork / "fork");
  const Cli cli = make_cli(dir);
  const std::string train_dir = (dir / "train").string(), test_dir = (dir / "test").string();
  cli.run({"make-data", "--out", train_dir, "--geometry", "fork", "--modes", "2", "--n", "2000", "--seed", "7"});
  cli.run({"make-data", "--out", test_dir, "--geometry", "fork", "--modes", "2", "--n", "500", "--seed", "8"});
  const std::string test_scenes = test_dir + "/id.scenes.jsonl";

  auto metrics_for = [&](int K) {
    const std::string ckpt = (dir / ("k" + std::to_string(K) + ".ckpt")).string();
    cli.run({"train", "--data", train_dir + "/id.scenes.jsonl", "--out", ckpt, "--k", std::to_string(K),
             "--epochs", "50", "--lr", "1e-3", "--threads", "1"});
    const std::string preds = ckpt + ".pred.jsonl";
    cli.run({"predict", "--checkpoint", ckpt, "--scenes", test_scenes, "--out", preds, "--m", "6"});
    return nlohmann::json::parse(
      cli.run({"evaluate", "--scenes", test_scenes, "--predictions", preds, "--mr", "argoverse"}));
  };
  const auto cv = nlohmann::json::parse(cli.run({"evaluate", "--scenes", test_scenes, "--baseline", "cv", "--mr", "argoverse"}));
  const auto k2 = metrics_for(2);
  const auto k1 = metrics_for(1);
  const double cv_fde = cv["min_fde"], k2_fde = k2["min_fde"], k1_fde = k1["min_fde"], k2_mr = k2["miss_rate"];
  const bool beats_cv = k2_fde <= kFdeMargin * cv_fde;
  const bool mr_ok = k2_mr <= kMaxMissRate;
  const bool k1_worse = k1_fde > k2_fde;
  return {beats_cv && mr_ok && k1_worse,
          "minFDE6 K=2 " + fmt(k2_fde) + " vs CV " + fmt(cv_fde) + " (need <= " + fmt(kFdeMargin * cv_fde) +
            "): " + (beats_cv ? "ok" : "no") + "; MR K=2 " + fmt(k2_mr) + ": " + (mr_ok ? "ok" : "no") +
            "; K=1 " + fmt(k1_fde) + " > K=2: " + (k1_worse ? "ok" : "no") + ", " + fmt(seconds_since(start), 4) + " s"};
}

// 8. OOD entropy on the arc-choice geometry.
Outcome ood_direction()
{
  const auto start = Clock::now();
  const fs::path dir = fresh(kWork / "ood");
  const Cli cli = make_cli(dir);
  int higher = 0;
  std::string detail;
  for (int seed : {1, 2, 3}) {
    const std::string data = (dir / ("seed" + std::to_string(seed))).string();
    const std::string ckpt = data + "/model.ckpt";
    // 2000 ID scenes and the fork run's training budget.
    cli.run({"make-data", "--out", data, "--geometry", "arc_choice", "--n", "2500", "--ood-frac", "0.2",
             "--seed", std::to_string(seed)});
    cli.run({"train", "--data", data + "/id.scenes.jsonl", "--out", ckpt, "--epochs", "50", "--lr", "1e-3",
             "--seed", std::to_string(seed), "--threads", "1"});
    const auto report = nlohmann::json::parse(cli.run({"uq-report", "--checkpoint", ckpt, "--scenes",
                                                        data + "/id.scenes.jsonl", data + "/ood.scenes.jsonl",
                                                        "--seed", std::to_string(seed)}));
    const auto & change = report["changes"].at(0);
    const double id = change["id_mean"], ood = change["ood_mean"], pct = change["percent_change"];
    higher += ood > id;
    detail += "seed " + std::to_string(seed) + " ID " + fmt(id, 5) + " OOD " + fmt(ood, 5) + " (" +
              (pct >= 0 ? "+" : "") + fmt(pct, 3) + "%); ";
  }
  return {higher >= kOodSeedsNeeded,
          detail + std::to_string(higher) + "/3 seeds higher on OOD, " + fmt(seconds_since(start), 4) + " s"};
}

// 9. Two identical pipelines produce identical bytes.
std::vector<fs::path> pipeline(const Cli & cli, const fs::path & dir)
{
  const std::string d = dir.string();
  cli.run({"make-data", "--out", d, "--geometry", "merge", "--n", "120", "--ood-frac", "0.25", "--seed", "9"});
  const std::string id = d + "/id.scenes.jsonl", ood = d + "/ood.scenes.jsonl", ckpt = d + "/model.ckpt";
  cli.run({"train", "--data", id, "--out", ckpt, "--epochs", "3", "--batch", "16", "--seed", "9", "--threads", "1"});
  cli.run({"predict", "--checkpoint", ckpt, "--scenes", ood, "--out", d + "/pred.jsonl"});
  cli.run({"evaluate", "--scenes", ood, "--predictions", d + "/pred.jsonl", "--out", d + "/metrics.json"});
  cli.run({"uq-report", "--checkpoint", ckpt, "--scenes", id, ood, "--out", d + "/uq.json"});
  cli.run({"heatmap", "--checkpoint", ckpt, "--scenes", ood, "--out", d + "/heat.txt", "--ppm", d + "/heat.ppm"});
  std::vector<fs::path> files;
  for (const auto & e : fs::directory_iterator(dir)) {
    if (e.path().filename() != "stderr.log") files.push_back(e.path().filename());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Outcome determinism()
{
  const fs::path a = fresh(kWork / "determinism_a"), b = fresh(kWork / "determinism_b");
  const auto files_a = pipeline(make_cli(a), a);
  const auto files_b = pipeline(make_cli(b), b);
  std::string differ;
  for (const auto & f : files_a) {
    if (test::slurp(a / f) != test::slurp(b / f)) differ += " " + f.string();
  }
  const bool pass = files_a == files_b && differ.empty() && files_a.size() >= 10;
  return {pass, std::to_string(files_a.size()) + " files compared" +
                  (differ.empty() ? std::string(", all identical") : ", differ:" + differ)};
}

struct Criterion
{
  int id;
  const char * name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
  {1, "closed forms", closed_forms},
  {2, "gradients", gradients},
  {3, "ELBO bound", elbo_bound},
  {4, "Monte-Carlo consistency", mc_consistency},
  {5, "NMS and completion", nms_and_completion},
  {6, "metric oracles", metric_oracles},
  {7, "fork training", fork_training},
  {8, "OOD entropy", ood_direction},
  {9, "determinism", determinism},
};

}  // namespace

int main(int argc, char ** argv)
{
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto & c : kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception & e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " [" << c.name << "] " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
