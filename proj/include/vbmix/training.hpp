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

#ifndef VBMIX__TRAINING_HPP_
#define VBMIX__TRAINING_HPP_

// Objective and optimizer.
//
// Per scene the evidence lower bound is estimated from n_mc reparameterized
// posterior paths v_j:
//
//   term1 = mean_j log p(s_f | v_j, x)
//   term2 = mean_j sum_k w_jk KL(q(v|s_f,x) || p(v|x,k)) along v_j
//   term3 = mean_j KL(w_j || uniform)
//   elbo  = term1 - term2 - term3
//
// with w_j the component posterior of v_j. The assignment network is fit to
// importance-weighted responsibilities of the same samples with a focal
// loss, and the total loss is -elbo + alpha * focal, averaged over scenes.

#include "vbmix/mixture.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vbmix
{

struct TrainConfig
{
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-4;
  int decay_step = 5;  // epochs
  double decay_rate = 0.3;
  double alpha = 1.0;
  double gamma_focal = 2.0;
  int n_mc = 4;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Scenes per gradient chunk; chunks are reduced in a fixed order, so the
  /// result does not depend on `threads`.
  int chunk_size = 16;
  int threads = 1;

  bool operator==(const TrainConfig &) const = default;
};

/// Throws Error(kInvalidConfig).
void validate(const TrainConfig & config);

/// Learning rate in effect during `epoch` (0-based).
double learning_rate(const TrainConfig & config, int epoch);

// ---------------------------------------------------------------------------
// Closed forms.
// ---------------------------------------------------------------------------

/// KL(q || p) between diagonal Gaussians, summed over coordinates.
double kl_diag(const GaussianDiag & q, const GaussianDiag & p);

/// KL(q || p) between categorical distributions with 0 log 0 = 0.
/// Throws Error(kNumerical) if p_k = 0 where q_k > 0.
double kl_categorical(const Eigen::VectorXd & q, const Eigen::VectorXd & p);

inline constexpr double kFocalLogFloor = -30.0;

/// -sum_k (1 - pi_k)^gamma * target_k * max(log pi_k, -30). Sets *clamped
/// when the floor was hit for a component with positive target.
double focal_loss(
  const Eigen::VectorXd & pi_hat, const Eigen::VectorXd & target, double gamma,
  bool * clamped = nullptr);

// ---------------------------------------------------------------------------
// Loss graph.
// ---------------------------------------------------------------------------

/// Posterior noise for a batch: T blocks of (B * n_mc) x d_v, row b*n_mc + j.
using BatchNoise = std::vector<ad::Matrix>;

/// Noise of one scene: T blocks of n_mc x d_v.
BatchNoise draw_noise(int T, int n_mc, int d_v, std::mt19937_64 & rng);
/// Noise derived from (seed, epoch, scene index) only.
BatchNoise scene_noise(std::uint64_t seed, int epoch, std::size_t scene_index, int T, int n_mc, int d_v);
BatchNoise stack_noise(const std::vector<BatchNoise> & per_scene);

struct LossOptions
{
  int n_mc = 4;
  double alpha = 1.0;
  double gamma_focal = 2.0;
  /// B x K responsibilities to use instead of recomputing them.
  const ad::Matrix * frozen_targets = nullptr;
};

struct LossGraph
{
  ad::Var total;
  ad::Var elbo;
  ad::Var term1;
  ad::Var term2;
  ad::Var term3;
  ad::Var focal;
  ad::Var term2_rows;  // (B * n_mc) x 1
  ad::Var elbo_rows;   // (B * n_mc) x 1
  ad::Matrix targets;  // B x K, gradient-stopped
};

/// x is B x d_x; futures holds B matrices of T x 2 displacements.
LossGraph loss_graph_from_context(
  ad::Tape & t, const Model & m, ad::Var x, const std::vector<const ad::Matrix *> & futures,
  const BatchNoise & noise, const LossOptions & options);

LossGraph loss_graph(
  ad::Tape & t, const Model & m, const std::vector<const PreparedScene *> & batch,
  const BatchNoise & noise, const LossOptions & options);

struct LossBreakdown
{
  double total = 0.0;
  double elbo = 0.0;
  double term1 = 0.0;
  double term2 = 0.0;
  double term3 = 0.0;
  double focal = 0.0;
};

LossBreakdown breakdown(const LossGraph & g);

/// Batch ELBO with noise drawn from `rng`. Throws Error(kInvalidInput) if a
/// scene has no future.
LossBreakdown elbo(
  const Model & m, const std::vector<const PreparedScene *> & batch, int n_mc,
  std::mt19937_64 & rng);

LossBreakdown total_loss(
  const Model & m, const std::vector<const PreparedScene *> & batch, const LossOptions & options,
  std::mt19937_64 & rng);

// ---------------------------------------------------------------------------
// Optimization.
// ---------------------------------------------------------------------------

struct TrainState
{
  int epoch = 0;  // completed epochs
  long step = 0;  // optimizer steps taken
  std::vector<ad::Matrix> adam_m;
  std::vector<ad::Matrix> adam_v;
};

struct EpochMetrics
{
  int epoch = 0;  // 1-based
  double lr = 0.0;
  LossBreakdown loss;
};

std::string format_metrics(const EpochMetrics & m);

using EpochCallback = std::function<void(const EpochMetrics &, const Model &, const TrainState &)>;

/// Trains `model` in place. Resumes from `state` when it carries a completed
/// epoch count. Throws Error(kNumerical) naming the epoch and batch on a
/// non-finite loss.
void train(
  Model & model, const std::vector<PreparedScene> & data, const TrainConfig & config,
  TrainState & state, std::ostream * metrics_log = nullptr, const EpochCallback & on_epoch = {});

/// Loss gradient of one batch, reduced over fixed-size chunks in order.
LossBreakdown batch_gradient(
  const Model & m, const std::vector<const PreparedScene *> & batch,
  const std::vector<BatchNoise> & noise, const TrainConfig & config,
  std::vector<ad::Matrix> & grads);

// ---------------------------------------------------------------------------
// Gradient verification.
// ---------------------------------------------------------------------------

struct GradCheckOptions
{
  double step = 1e-5;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  /// Central differences at step 1e-5 carry roundoff near 1e-10, so
  /// gradients below the floor are effectively compared absolutely.
  double floor = 1e-5;
  /// Parameters whose name passes the filter are checked; all when empty.
  std::function<bool(const std::string &)> filter;
};

struct GradCheckResult
{
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Compares the analytic gradient of `loss` with central differences for
/// every selected scalar. `loss` must rebuild its graph from the model's
/// current parameter values on the given tape and return a 1x1 Var.
GradCheckResult grad_check(
  Model & m, const std::function<ad::Var(ad::Tape &, const Model &)> & loss,
  const GradCheckOptions & options);

}  // namespace vbmix

#endif  // VBMIX__TRAINING_HPP_
