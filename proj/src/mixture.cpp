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

#include "vbmix/mixture.hpp"

#include "vbmix/error.hpp"

#include <cmath>
#include <numbers>

namespace vbmix
{

namespace
{

using ad::Matrix;
using ad::Tape;
using ad::Var;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Var bound_log_std(Var raw)
{
  return ad::scale(ad::tanh(ad::scale(raw, 1.0 / kLogStdBound)), kLogStdBound);
}

/// Splits [mean, log_std] columns and bounds the log-std half.
std::pair<Var, Var> split_diag(Var out, Eigen::Index d)
{
  return {ad::slice_cols(out, 0, d), bound_log_std(ad::slice_cols(out, d, d))};
}

void scale_weights(ad::ParamStore & store, const nn::Linear & layer, double gain)
{
  for (auto w : layer.weights) {
    store[w].value *= gain;
  }
}

Var reparameterize(Tape & t, Var mean, Var log_std, const Matrix & eps)
{
  return ad::add(mean, ad::mul(ad::exp(log_std), t.constant(eps)));
}

Var row_vector(Tape & t, const Eigen::VectorXd & v) { return t.constant(v.transpose()); }

GaussianDiag diag_row(const DiagSeq & d, std::size_t step, Eigen::Index row = 0)
{
  return GaussianDiag{
    d.mean[step].value().row(row).transpose(), d.log_std[step].value().row(row).transpose()};
}

std::vector<Var> path_vars(Tape & t, const LatentPath & v)
{
  std::vector<Var> out;
  out.reserve(v.size());
  for (const auto & vt : v) {
    out.push_back(row_vector(t, vt));
  }
  return out;
}

std::vector<Var> step_blocks(Tape & t, const Matrix & s_f)
{
  std::vector<Var> out;
  for (Eigen::Index i = 0; i < s_f.rows(); ++i) {
    out.push_back(t.constant(s_f.row(i)));
  }
  return out;
}

void check_path(const Model & m, const LatentPath & v)
{
  const MixtureConfig & c = m.mixture();
  if (static_cast<int>(v.size()) != c.T) {
    throw invalid_input(
      "latent path length " + std::to_string(v.size()) + " != T=" + std::to_string(c.T));
  }
  for (const auto & vt : v) {
    if (vt.size() != c.d_v) {
      throw invalid_input("latent width " + std::to_string(vt.size()) + " != d_v");
    }
  }
}

void check_future(const Model & m, const Matrix & s_f)
{
  if (s_f.rows() != m.mixture().T || s_f.cols() != 2) {
    throw invalid_input(
      "future has " + std::to_string(s_f.rows()) + " steps, T=" + std::to_string(m.mixture().T));
  }
}

void check_component(const Model & m, int k)
{
  if (k < 0 || k >= m.mixture().K) {
    throw invalid_input(
      "component " + std::to_string(k) + " out of range [0, " + std::to_string(m.mixture().K) +
      ")");
  }
}

}  // namespace

void validate(const MixtureConfig & c)
{
  if (c.K < 1) throw invalid_config("K must be >= 1");
  if (c.d_v < 1) throw invalid_config("d_v must be >= 1");
  if (c.d_x < 1) throw invalid_config("d_x must be >= 1");
  if (c.T < 1) throw invalid_config("T must be >= 1");
  if (c.H < 1) throw invalid_config("H must be >= 1");
  if (c.hidden < 1) throw invalid_config("hidden must be >= 1");
  if (c.decoder_hidden_layers < 0) throw invalid_config("decoder_hidden_layers must be >= 0");
}

void validate(const ModelConfig & c)
{
  validate(c.encoder);
  validate(c.mixture);
  if (c.encoder.d_model != c.mixture.d_x) {
    throw invalid_config(
      "encoder d_model " + std::to_string(c.encoder.d_model) + " != mixture d_x " +
      std::to_string(c.mixture.d_x));
  }
}

Eigen::Matrix2d Gaussian2Full::factor() const
{
  Eigen::Matrix2d l;
  l << std::exp(log_l11), 0.0, l21, std::exp(log_l22);
  return l;
}

Eigen::Matrix2d Gaussian2Full::covariance() const
{
  const Eigen::Matrix2d l = factor();
  return l * l.transpose();
}

Model Model::create(const ModelConfig & config)
{
  validate(config);
  const MixtureConfig & c = config.mixture;
  Model m;
  m.config_ = config;
  nn::Initializer init(config.init_seed);
  m.encoder = Encoder::create(m.store, init, config.encoder);
  const Eigen::Index dv = c.d_v, dx = c.d_x, hs = c.rnn_hidden();
  for (int k = 0; k < c.K; ++k) {
    const std::string p = "prior" + std::to_string(k);
    PriorNet net;
    net.init = nn::Mlp::create(m.store, init, p + ".init", {dx}, c.hidden, 1, 2 * dv);
    net.cell = nn::LstmCell::create(m.store, init, p + ".cell", {dv, dx}, hs);
    net.head = nn::Linear::create(m.store, init, p + ".head", {hs, dv}, 2 * dv);
    m.priors.push_back(std::move(net));
  }
  m.decoder =
    nn::Mlp::create(m.store, init, "dec", {dv, dx}, c.hidden, c.decoder_hidden_layers, 5);
  m.posterior.summary = nn::LstmCell::create(m.store, init, "post.summary", {2}, hs);
  m.posterior.first = nn::Mlp::create(m.store, init, "post.first", {dx, hs, 2}, c.hidden, 1, 2 * dv);
  m.posterior.cell = nn::LstmCell::create(m.store, init, "post.cell", {dv, dx, hs, 2}, hs);
  m.posterior.head = nn::Linear::create(m.store, init, "post.head", {hs, dv}, 2 * dv);
  m.assignment = nn::Mlp::create(m.store, init, "assign", {dx}, c.hidden, 1, c.K);
  for (const auto & net : m.priors) {
    scale_weights(m.store, net.init.layers.back(), kOutputInitGain);
    scale_weights(m.store, net.head, kOutputInitGain);
  }
  scale_weights(m.store, m.decoder.layers.back(), kOutputInitGain);
  scale_weights(m.store, m.posterior.first.layers.back(), kOutputInitGain);
  scale_weights(m.store, m.posterior.head, kOutputInitGain);
  return m;
}

std::vector<std::pair<std::string, std::size_t>> Model::parameter_counts() const
{
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto & g : kParameterGroups) {
    out.emplace_back(g, store.scalar_count(g));
  }
  return out;
}

PreparedScene prepare_scene(const Scene & world, const ModelConfig & config)
{
  const MixtureConfig & c = config.mixture;
  validate_scene(world, Horizons{c.H, world.future ? c.T : 0});
  auto [local, pose] = to_target_frame(world);
  PreparedScene p;
  p.scene_id = world.scene_id;
  p.meta = world.meta;
  p.pose = pose;
  p.input = make_encoder_input(local, config.encoder);
  if (local.future) {
    const Path d = positions_to_displacements(*local.future, Point::Zero());
    Matrix s(static_cast<Eigen::Index>(d.size()), 2);
    for (std::size_t i = 0; i < d.size(); ++i) {
      s.row(static_cast<Eigen::Index>(i)) = d[i].transpose();
    }
    p.displacements = std::move(s);
  }
  return p;
}

PosteriorGraph posterior_graph(
  Tape & t, const Model & m, Var x, const std::vector<Var> & s, const std::vector<Matrix> & eps)
{
  const MixtureConfig & c = m.mixture();
  const PosteriorNet & net = m.posterior;
  const auto T = static_cast<std::size_t>(c.T);
  nn::LstmState st = net.summary.zero_state(t, x.rows());
  for (std::size_t i = 0; i < T; ++i) {
    st = net.summary.step(t, net.summary.gates.partial(t, {{0, s[i]}}, true), st);
  }
  const Var summary = st.h;

  PosteriorGraph g;
  const Var first_pre = net.first.layers.front().partial(t, {{0, x}, {1, summary}, {2, s[0]}}, true);
  auto [mu0, ls0] = split_diag(net.first.from_preactivation(t, first_pre), c.d_v);
  g.q.mean.push_back(mu0);
  g.q.log_std.push_back(ls0);
  g.v.push_back(reparameterize(t, mu0, ls0, eps[0]));

  const Var context = net.cell.gates.partial(t, {{1, x}, {2, summary}}, true);
  nn::LstmState h = net.cell.zero_state(t, x.rows());
  for (std::size_t i = 1; i < T; ++i) {
    const Var pre = ad::add(context, net.cell.gates.partial(t, {{0, g.v[i - 1]}, {3, s[i]}}, false));
    h = net.cell.step(t, pre, h);
    auto [mu, ls] = split_diag(net.head.partial(t, {{0, h.h}, {1, g.v[i - 1]}}, true), c.d_v);
    g.q.mean.push_back(mu);
    g.q.log_std.push_back(ls);
    g.v.push_back(reparameterize(t, mu, ls, eps[i]));
  }
  return g;
}

namespace
{

/// Shared recurrence of the prior chain; `next_v` yields v_t from step t's
/// distribution and the teacher-forced path when one is given.
template <typename NextV>
PriorRollout run_prior(Tape & t, const Model & m, Var x, int k, NextV next_v)
{
  const MixtureConfig & c = m.mixture();
  const PriorNet & net = m.priors[static_cast<std::size_t>(k)];
  PriorRollout r;
  auto [mu0, ls0] = split_diag(net.init(t, x), c.d_v);
  r.p.mean.push_back(mu0);
  r.p.log_std.push_back(ls0);
  r.v.push_back(next_v(0, mu0, ls0));
  const Var context = net.cell.gates.partial(t, {{1, x}}, true);
  nn::LstmState h = net.cell.zero_state(t, x.rows());
  for (std::size_t i = 1; i < static_cast<std::size_t>(c.T); ++i) {
    const Var prev = r.v[i - 1];
    h = net.cell.step(t, ad::add(context, net.cell.gates.partial(t, {{0, prev}}, false)), h);
    auto [mu, ls] = split_diag(net.head.partial(t, {{0, h.h}, {1, prev}}, true), c.d_v);
    r.p.mean.push_back(mu);
    r.p.log_std.push_back(ls);
    r.v.push_back(next_v(i, mu, ls));
  }
  return r;
}

}  // namespace

DiagSeq prior_along_graph(Tape &, const Model & m, Var x, int k, const std::vector<Var> & v)
{
  check_component(m, k);
  return run_prior(*x.tape, m, x, k, [&v](std::size_t i, Var, Var) { return v[i]; }).p;
}

PriorRollout prior_rollout_graph(
  Tape & t, const Model & m, Var x, int k, const std::vector<Matrix> & eps)
{
  check_component(m, k);
  return run_prior(t, m, x, k, [&t, &eps](std::size_t i, Var mu, Var ls) {
    return eps.empty() ? mu : reparameterize(t, mu, ls, eps[i]);
  });
}

Var decode_graph(Tape & t, const Model & m, Var x, const std::vector<Var> & v)
{
  const nn::Linear & first = m.decoder.layers.front();
  const Var x_pre = first.partial(t, {{1, x}}, true);
  const Var x_tiled =
    v.size() == 1 ? x_pre : ad::concat_rows(std::vector<Var>(v.size(), x_pre));
  const Var v_stacked = v.size() == 1 ? v.front() : ad::concat_rows(v);
  const Var out =
    m.decoder.from_preactivation(t, ad::add(first.partial(t, {{0, v_stacked}}, false), x_tiled));
  return ad::concat_cols({
    ad::slice_cols(out, 0, 2),
    bound_log_std(ad::slice_cols(out, 2, 1)),
    ad::slice_cols(out, 3, 1),
    bound_log_std(ad::slice_cols(out, 4, 1)),
  });
}

Var gaussian2_log_density(Var decoded, Var s)
{
  const Var d = ad::sub(s, ad::slice_cols(decoded, 0, 2));
  const Var la = ad::slice_cols(decoded, 2, 1);
  const Var b = ad::slice_cols(decoded, 3, 1);
  const Var lc = ad::slice_cols(decoded, 4, 1);
  // Forward substitution with L = [[e^la, 0], [b, e^lc]].
  const Var z1 = ad::mul(ad::slice_cols(d, 0, 1), ad::exp(ad::neg(la)));
  const Var z2 = ad::mul(ad::sub(ad::slice_cols(d, 1, 1), ad::mul(b, z1)), ad::exp(ad::neg(lc)));
  const Var quad = ad::add(ad::square(z1), ad::square(z2));
  return ad::add_scalar(ad::neg(ad::add(ad::add(la, lc), ad::scale(quad, 0.5))), -kLog2Pi);
}

Var diag_log_density(const std::vector<Var> & v, const DiagSeq & d)
{
  Var total;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Var z = ad::mul(ad::sub(v[i], d.mean[i]), ad::exp(ad::neg(d.log_std[i])));
    const Var step = ad::row_sum(ad::neg(ad::add(d.log_std[i], ad::scale(ad::square(z), 0.5))));
    total = i == 0 ? step : ad::add(total, step);
  }
  const double width = static_cast<double>(v.front().cols());
  return ad::add_scalar(total, -0.5 * width * kLog2Pi * static_cast<double>(v.size()));
}

Var diag_kl(const DiagSeq & q, const DiagSeq & p)
{
  Var total;
  for (std::size_t i = 0; i < q.mean.size(); ++i) {
    const Var ratio = ad::exp(ad::scale(ad::sub(q.log_std[i], p.log_std[i]), 2.0));
    const Var diff = ad::mul(ad::sub(q.mean[i], p.mean[i]), ad::exp(ad::neg(p.log_std[i])));
    const Var terms = ad::add(
      ad::sub(p.log_std[i], q.log_std[i]),
      ad::scale(ad::add_scalar(ad::add(ratio, ad::square(diff)), -1.0), 0.5));
    const Var step = ad::row_sum(terms);
    total = i == 0 ? step : ad::add(total, step);
  }
  return total;
}

Var sum_steps(Var stacked, int T)
{
  const Eigen::Index rows = stacked.rows() / T;
  Var total = ad::slice_rows(stacked, 0, rows);
  for (int i = 1; i < T; ++i) {
    total = ad::add(total, ad::slice_rows(stacked, i * rows, rows));
  }
  return total;
}

Var assignment_graph(Tape & t, const Model & m, Var x)
{
  return ad::log_softmax_rows(m.assignment(t, x));
}

Eigen::VectorXd encode_scene(const Model & m, const PreparedScene & scene)
{
  Tape t(m.store, false);
  return m.encoder.forward(t, {&scene.input}).value().row(0).transpose();
}

std::vector<GaussianDiag> prior_rollout(
  const Model & m, const Eigen::VectorXd & x, int k, const LatentPath * feed)
{
  check_component(m, k);
  Tape t(m.store, false);
  const Var xv = row_vector(t, x);
  DiagSeq d;
  if (feed) {
    check_path(m, *feed);
    d = prior_along_graph(t, m, xv, k, path_vars(t, *feed));
  } else {
    d = prior_rollout_graph(t, m, xv, k, {}).p;
  }
  std::vector<GaussianDiag> out;
  for (std::size_t i = 0; i < d.mean.size(); ++i) {
    out.push_back(diag_row(d, i));
  }
  return out;
}

PosteriorSample posterior_rollout(
  const Model & m, const Eigen::VectorXd & x, const Matrix & s_f, const LatentPath & eps)
{
  check_future(m, s_f);
  check_path(m, eps);
  Tape t(m.store, false);
  std::vector<Matrix> e;
  for (const auto & v : eps) {
    e.push_back(v.transpose());
  }
  const PosteriorGraph g = posterior_graph(t, m, row_vector(t, x), step_blocks(t, s_f), e);
  PosteriorSample out;
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    out.q.push_back(diag_row(g.q, i));
    out.v.push_back(g.v[i].value().row(0).transpose());
  }
  return out;
}

Gaussian2Full decode_step(const Model & m, const Eigen::VectorXd & v, const Eigen::VectorXd & x)
{
  Tape t(m.store, false);
  const Matrix out = decode_graph(t, m, row_vector(t, x), {row_vector(t, v)}).value();
  Gaussian2Full g;
  g.mean = out.block(0, 0, 1, 2).transpose();
  g.log_l11 = out(0, 2);
  g.l21 = out(0, 3);
  g.log_l22 = out(0, 4);
  return g;
}

double log_lik_future(
  const Model & m, const Matrix & s_f, const LatentPath & v, const Eigen::VectorXd & x)
{
  check_future(m, s_f);
  check_path(m, v);
  Tape t(m.store, false);
  const Var dec = decode_graph(t, m, row_vector(t, x), path_vars(t, v));
  return gaussian2_log_density(dec, t.constant(s_f)).value().sum();
}

double log_prior_v(const Model & m, const LatentPath & v, const Eigen::VectorXd & x, int k)
{
  check_component(m, k);
  check_path(m, v);
  Tape t(m.store, false);
  const std::vector<Var> path = path_vars(t, v);
  return diag_log_density(path, prior_along_graph(t, m, row_vector(t, x), k, path)).scalar();
}

Eigen::VectorXd z_posterior(const Model & m, const LatentPath & v, const Eigen::VectorXd & x)
{
  Eigen::VectorXd lp(m.mixture().K);
  for (int k = 0; k < m.mixture().K; ++k) {
    lp(k) = log_prior_v(m, v, x, k);
  }
  const double mx = lp.maxCoeff();
  const Eigen::VectorXd e = (lp.array() - mx).exp();
  return e / e.sum();
}

AssignmentOutput assignment_forward(const Model & m, const Eigen::VectorXd & x)
{
  Tape t(m.store, false);
  AssignmentOutput out;
  out.log_weights = assignment_graph(t, m, row_vector(t, x)).value().row(0).transpose();
  out.probs = out.log_weights.array().exp();
  return out;
}

Eigen::VectorXd responsibilities_from_samples(const Matrix & log_joint)
{
  const Eigen::Index n = log_joint.rows();
  Eigen::VectorXd per_k(log_joint.cols());
  for (Eigen::Index k = 0; k < log_joint.cols(); ++k) {
    const double mx = log_joint.col(k).maxCoeff();
    per_k(k) = mx + std::log((log_joint.col(k).array() - mx).exp().sum() / static_cast<double>(n));
  }
  const double mx = per_k.maxCoeff();
  const Eigen::VectorXd e = (per_k.array() - mx).exp();
  return e / e.sum();
}

LatentPath standard_normal_path(int T, int d, std::mt19937_64 & rng)
{
  std::normal_distribution<double> n(0.0, 1.0);
  LatentPath out(static_cast<std::size_t>(T), Eigen::VectorXd(d));
  for (auto & v : out) {
    for (int j = 0; j < d; ++j) {
      v(j) = n(rng);
    }
  }
  return out;
}

Eigen::VectorXd assignment_target(
  const Model & m, const Matrix & s_f, const Eigen::VectorXd & x, int n_mc, std::mt19937_64 & rng)
{
  if (n_mc < 1) {
    throw invalid_input("n_mc must be >= 1");
  }
  check_future(m, s_f);
  const MixtureConfig & c = m.mixture();
  Tape t(m.store, false);
  const Var xr = t.constant(x.transpose().replicate(n_mc, 1));
  std::vector<Var> s;
  std::vector<Matrix> eps;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < c.T; ++i) {
    s.push_back(t.constant(s_f.row(i).replicate(n_mc, 1)));
  }
  for (int i = 0; i < c.T; ++i) {
    Matrix e(n_mc, c.d_v);
    for (Eigen::Index j = 0; j < e.size(); ++j) {
      e.data()[j] = normal(rng);
    }
    eps.push_back(std::move(e));
  }
  const PosteriorGraph g = posterior_graph(t, m, xr, s, eps);
  const Matrix lq = diag_log_density(g.v, g.q).value();
  const Matrix ll =
    sum_steps(gaussian2_log_density(decode_graph(t, m, xr, g.v), ad::concat_rows(s)), c.T).value();
  Matrix joint(n_mc, c.K);
  for (int k = 0; k < c.K; ++k) {
    joint.col(k) = ll + diag_log_density(g.v, prior_along_graph(t, m, xr, k, g.v)).value() - lq;
  }
  return responsibilities_from_samples(joint);
}

}  // namespace vbmix
