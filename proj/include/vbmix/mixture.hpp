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

#ifndef VBMIX__MIXTURE_HPP_
#define VBMIX__MIXTURE_HPP_

// K-component mixture over future displacement sequences.
//
// Component k draws a latent path v_1..v_T from a Gaussian chain: v_1 from
// an MLP of x, v_{t+1} from an LSTM fed with (v_t, x). A shared decoder maps
// (v_t, x) to a full bivariate Gaussian over the displacement at step t. The
// variational posterior over v is a second Gaussian chain that also sees the
// future; the posterior over the component follows from Bayes' rule on the
// component priors of the sampled path. An assignment network predicts the
// component weights from x alone.
//
// Graph-level functions operate on row batches: every Var has one row per
// (scene, sample) pair. Value-level wrappers take single vectors.

#include "vbmix/autodiff.hpp"
#include "vbmix/encoder.hpp"
#include "vbmix/nn.hpp"
#include "vbmix/scene.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vbmix
{

/// Network log-std outputs pass through b * tanh(raw / b), keeping every
/// standard deviation within [e^-b, e^b] without zeroing gradients.
inline constexpr double kLogStdBound = 5.0;
/// Gain applied to the initial weights of layers that emit distribution
/// parameters, so a fresh model starts near unit Gaussians.
inline constexpr double kOutputInitGain = 0.1;

struct MixtureConfig
{
  int K = 6;
  int d_v = 8;
  int d_x = 64;  // must equal the encoder's d_model
  int T = 12;
  int H = 8;
  int hidden = 64;               // MLP hidden width
  int decoder_hidden_layers = 1;  // 0 gives an affine decoder

  int rnn_hidden() const { return 2 * d_v; }
  bool operator==(const MixtureConfig &) const = default;
};

struct ModelConfig
{
  EncoderConfig encoder;
  MixtureConfig mixture;
  std::uint64_t init_seed = 0;

  bool operator==(const ModelConfig &) const = default;
};

/// Throws Error(kInvalidConfig).
void validate(const MixtureConfig & config);
void validate(const ModelConfig & config);

struct GaussianDiag
{
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;
};

/// Bivariate Gaussian with Cholesky factor [[exp(log_l11), 0], [l21, exp(log_l22)]].
struct Gaussian2Full
{
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  double log_l11 = 0.0;
  double l21 = 0.0;
  double log_l22 = 0.0;

  Eigen::Matrix2d factor() const;
  Eigen::Matrix2d covariance() const;
};

using LatentPath = std::vector<Eigen::VectorXd>;

/// Prior chain of one component.
struct PriorNet
{
  nn::Mlp init;         // x -> [mean, log_std]
  nn::LstmCell cell;    // inputs (v_t, x)
  nn::Linear head;      // (h, v_t) -> [mean, log_std]
};

struct PosteriorNet
{
  nn::LstmCell summary;  // forward pass over s_f
  nn::Mlp first;         // (x, summary, s_1) -> [mean, log_std]
  nn::LstmCell cell;     // inputs (v_t, x, summary, s_{t+1})
  nn::Linear head;       // (h, v_t) -> [mean, log_std]
};

/// All learned parameters. Parameter names are prefixed by group:
/// "enc.", "prior<k>.", "dec.", "post.", "assign.".
class Model
{
public:
  static Model create(const ModelConfig & config);

  const ModelConfig & config() const { return config_; }
  const MixtureConfig & mixture() const { return config_.mixture; }

  ad::ParamStore store;
  Encoder encoder;
  std::vector<PriorNet> priors;
  nn::Mlp decoder;  // (v_t, x) -> [mean(2), log_l11, l21, log_l22]
  PosteriorNet posterior;
  nn::Mlp assignment;

  /// Scalar parameter counts per group, in group order.
  std::vector<std::pair<std::string, std::size_t>> parameter_counts() const;

private:
  ModelConfig config_;
};

inline const std::vector<std::string> kParameterGroups{"enc.", "prior", "dec.", "post.", "assign."};

/// A scene normalized to the target frame with precomputed encoder input.
struct PreparedScene
{
  std::string scene_id;
  SceneMeta meta;
  Pose2 pose;
  EncoderInput input;
  /// T x 2 future displacements in the target frame, when a future exists.
  std::optional<ad::Matrix> displacements;
};

/// Normalizes and checks horizons. Throws Error(kInvalidInput).
PreparedScene prepare_scene(const Scene & world, const ModelConfig & config);

// ---------------------------------------------------------------------------
// Graph-level building blocks.
// ---------------------------------------------------------------------------

/// Per-step diagonal Gaussians, each entry rows x d_v.
struct DiagSeq
{
  std::vector<ad::Var> mean;
  std::vector<ad::Var> log_std;
};

struct PosteriorGraph
{
  DiagSeq q;
  std::vector<ad::Var> v;  // reparameterized samples, rows x d_v
};

/// `s` holds T displacement blocks (rows x 2); `eps` holds T noise blocks.
PosteriorGraph posterior_graph(
  ad::Tape & t, const Model & m, ad::Var x, const std::vector<ad::Var> & s,
  const std::vector<ad::Matrix> & eps);

/// Prior of component k conditioned on the given path (teacher forcing).
DiagSeq prior_along_graph(
  ad::Tape & t, const Model & m, ad::Var x, int k, const std::vector<ad::Var> & v);

/// Prior of component k rolled out on its own samples. With `eps` empty the
/// per-step mean is fed back; otherwise v_t = mean + exp(log_std) * eps_t.
struct PriorRollout
{
  DiagSeq p;
  std::vector<ad::Var> v;
};
PriorRollout prior_rollout_graph(
  ad::Tape & t, const Model & m, ad::Var x, int k, const std::vector<ad::Matrix> & eps);

/// Decoder outputs for all steps, stacked step-major: row t*rows + r.
/// Columns: mean x, mean y, log_l11, l21, log_l22 (log terms bounded).
ad::Var decode_graph(ad::Tape & t, const Model & m, ad::Var x, const std::vector<ad::Var> & v);

/// Bivariate Gaussian log-density of stacked displacements (T*rows x 2)
/// under stacked decoder outputs; returns (T*rows x 1).
ad::Var gaussian2_log_density(ad::Var decoded, ad::Var s);

/// Summed log-density over steps of diagonal Gaussians; returns rows x 1.
ad::Var diag_log_density(const std::vector<ad::Var> & v, const DiagSeq & d);

/// Summed closed-form KL(q || p) over steps; returns rows x 1.
ad::Var diag_kl(const DiagSeq & q, const DiagSeq & p);

/// Sums T step-major blocks of rows: (T*rows x c) -> (rows x c).
ad::Var sum_steps(ad::Var stacked, int T);

/// log-softmax of the assignment logits (rows x K).
ad::Var assignment_graph(ad::Tape & t, const Model & m, ad::Var x);

// ---------------------------------------------------------------------------
// Value-level API on a single context vector.
// ---------------------------------------------------------------------------

Eigen::VectorXd encode_scene(const Model & m, const PreparedScene & scene);

/// Prior rollout of component k (0-based). With `feed` the recurrence is
/// conditioned on the given path; otherwise the per-step means are fed.
std::vector<GaussianDiag> prior_rollout(
  const Model & m, const Eigen::VectorXd & x, int k, const LatentPath * feed = nullptr);

struct PosteriorSample
{
  std::vector<GaussianDiag> q;
  LatentPath v;
};
/// `s_f` is T x 2; `eps` holds T vectors of width d_v.
PosteriorSample posterior_rollout(
  const Model & m, const Eigen::VectorXd & x, const ad::Matrix & s_f, const LatentPath & eps);

Gaussian2Full decode_step(const Model & m, const Eigen::VectorXd & v, const Eigen::VectorXd & x);

double log_lik_future(
  const Model & m, const ad::Matrix & s_f, const LatentPath & v, const Eigen::VectorXd & x);

double log_prior_v(const Model & m, const LatentPath & v, const Eigen::VectorXd & x, int k);

/// Softmax over k of log_prior_v (uniform component prior).
Eigen::VectorXd z_posterior(const Model & m, const LatentPath & v, const Eigen::VectorXd & x);

struct AssignmentOutput
{
  Eigen::VectorXd log_weights;
  Eigen::VectorXd probs;
};
AssignmentOutput assignment_forward(const Model & m, const Eigen::VectorXd & x);

/// Importance-weighted component responsibilities for an observed future.
Eigen::VectorXd assignment_target(
  const Model & m, const ad::Matrix & s_f, const Eigen::VectorXd & x, int n_mc,
  std::mt19937_64 & rng);

/// Normalized responsibilities from per-sample log-joint values:
/// log_joint(j, k) = log p(s|v_j) + log p(v_j|k) - log q(v_j).
Eigen::VectorXd responsibilities_from_samples(const ad::Matrix & log_joint);

/// Standard normal noise for T steps of width d.
LatentPath standard_normal_path(int T, int d, std::mt19937_64 & rng);

}  // namespace vbmix

#endif  // VBMIX__MIXTURE_HPP_
