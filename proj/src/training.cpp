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

#include "vbmix/training.hpp"

#include "vbmix/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

namespace vbmix
{

namespace
{

using ad::Matrix;
using ad::Tape;
using ad::Var;

void require_future(const PreparedScene & s)
{
  if (!s.displacements) {
    throw invalid_input("scene " + s.scene_id + " has no future");
  }
}

std::vector<const Matrix *> futures_of(const std::vector<const PreparedScene *> & batch)
{
  std::vector<const Matrix *> out;
  out.reserve(batch.size());
  for (const PreparedScene * s : batch) {
    require_future(*s);
    out.push_back(&*s->displacements);
  }
  return out;
}

std::vector<const EncoderInput *> inputs_of(const std::vector<const PreparedScene *> & batch)
{
  std::vector<const EncoderInput *> out;
  out.reserve(batch.size());
  for (const PreparedScene * s : batch) {
    out.push_back(&s->input);
  }
  return out;
}

Var concat_or_single(const std::vector<Var> & parts)
{
  return parts.size() == 1 ? parts.front() : ad::concat_cols(parts);
}

bool finite(const LossBreakdown & b)
{
  return std::isfinite(b.total) && std::isfinite(b.elbo) && std::isfinite(b.focal);
}

}  // namespace

void validate(const TrainConfig & c)
{
  if (c.epochs < 0) throw invalid_config("epochs must be >= 0");
  if (c.batch_size < 1) throw invalid_config("batch_size must be >= 1");
  if (!(c.lr > 0.0)) throw invalid_config("lr must be > 0");
  if (c.decay_step < 1) throw invalid_config("decay_step must be >= 1");
  if (!(c.decay_rate > 0.0)) throw invalid_config("decay_rate must be > 0");
  if (!(c.alpha >= 0.0)) throw invalid_config("alpha must be >= 0");
  if (!(c.gamma_focal >= 0.0)) throw invalid_config("gamma_focal must be >= 0");
  if (c.n_mc < 1) throw invalid_config("n_mc must be >= 1");
  if (c.chunk_size < 1) throw invalid_config("chunk_size must be >= 1");
  if (c.threads < 1) throw invalid_config("threads must be >= 1");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0) || !(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0) ||
      !(c.adam_eps > 0.0)) {
    throw invalid_config("Adam moments must lie in [0, 1) and eps > 0");
  }
}

double learning_rate(const TrainConfig & c, int epoch)
{
  return c.lr * std::pow(c.decay_rate, static_cast<double>(epoch / c.decay_step));
}

double kl_diag(const GaussianDiag & q, const GaussianDiag & p)
{
  if (q.mean.size() != p.mean.size() || q.log_std.size() != p.log_std.size() ||
      q.mean.size() != q.log_std.size()) {
    throw invalid_input("kl_diag width mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < q.mean.size(); ++i) {
    const double var_ratio = std::exp(2.0 * (q.log_std(i) - p.log_std(i)));
    const double d = (q.mean(i) - p.mean(i)) * std::exp(-p.log_std(i));
    kl += p.log_std(i) - q.log_std(i) + 0.5 * (var_ratio + d * d - 1.0);
  }
  return kl;
}

double kl_categorical(const Eigen::VectorXd & q, const Eigen::VectorXd & p)
{
  if (q.size() != p.size()) {
    throw invalid_input("kl_categorical size mismatch");
  }
  double kl = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    if (q(k) <= 0.0) {
      continue;
    }
    if (p(k) <= 0.0) {
      throw Error(ErrorKind::kNumerical, "kl_categorical: p is zero where q is positive");
    }
    kl += q(k) * std::log(q(k) / p(k));
  }
  return kl;
}

double focal_loss(
  const Eigen::VectorXd & pi_hat, const Eigen::VectorXd & target, double gamma, bool * clamped)
{
  if (pi_hat.size() != target.size()) {
    throw invalid_input("focal_loss size mismatch");
  }
  double loss = 0.0;
  bool hit = false;
  for (Eigen::Index k = 0; k < pi_hat.size(); ++k) {
    double lp = pi_hat(k) > 0.0 ? std::log(pi_hat(k)) : -HUGE_VAL;
    if (lp < kFocalLogFloor) {
      lp = kFocalLogFloor;
      hit = hit || target(k) > 0.0;
    }
    loss -= std::pow(1.0 - pi_hat(k), gamma) * target(k) * lp;
  }
  if (clamped) {
    *clamped = hit;
  }
  return loss;
}

BatchNoise draw_noise(int T, int n_mc, int d_v, std::mt19937_64 & rng)
{
  std::normal_distribution<double> n(0.0, 1.0);
  BatchNoise out;
  for (int i = 0; i < T; ++i) {
    Matrix e(n_mc, d_v);
    // Row-major fill: sample j, then coordinate.
    for (int j = 0; j < n_mc; ++j) {
      for (int c = 0; c < d_v; ++c) {
        e(j, c) = n(rng);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

BatchNoise scene_noise(
  std::uint64_t seed, int epoch, std::size_t scene_index, int T, int n_mc, int d_v)
{
  std::seed_seq seq{
    static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(scene_index),
    static_cast<std::uint32_t>(scene_index >> 32)};
  std::mt19937_64 rng(seq);
  return draw_noise(T, n_mc, d_v, rng);
}

BatchNoise stack_noise(const std::vector<BatchNoise> & per_scene)
{
  BatchNoise out;
  const std::size_t T = per_scene.front().size();
  for (std::size_t i = 0; i < T; ++i) {
    Eigen::Index rows = 0;
    for (const auto & s : per_scene) {
      rows += s[i].rows();
    }
    Matrix block(rows, per_scene.front()[i].cols());
    rows = 0;
    for (const auto & s : per_scene) {
      block.middleRows(rows, s[i].rows()) = s[i];
      rows += s[i].rows();
    }
    out.push_back(std::move(block));
  }
  return out;
}

LossGraph loss_graph_from_context(
  Tape & t, const Model & m, Var x, const std::vector<const Matrix *> & futures,
  const BatchNoise & noise, const LossOptions & o)
{
  const MixtureConfig & c = m.mixture();
  const auto B = static_cast<Eigen::Index>(futures.size());
  const Eigen::Index R = B * o.n_mc;
  if (static_cast<int>(noise.size()) != c.T || noise.front().rows() != R ||
      noise.front().cols() != c.d_v) {
    throw invalid_input("posterior noise does not match batch shape");
  }
  std::vector<Var> s;
  Matrix s_stacked(c.T * R, 2);
  for (int i = 0; i < c.T; ++i) {
    Matrix block(R, 2);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Matrix & f = *futures[static_cast<std::size_t>(b)];
      if (f.rows() != c.T || f.cols() != 2) {
        throw invalid_input("future length " + std::to_string(f.rows()) + " != T=" + std::to_string(c.T));
      }
      block.middleRows(b * o.n_mc, o.n_mc) = f.row(i).replicate(o.n_mc, 1);
    }
    s_stacked.middleRows(i * R, R) = block;
    s.push_back(t.constant(std::move(block)));
  }

  const Var xr = ad::repeat_rows(x, o.n_mc);
  const PosteriorGraph post = posterior_graph(t, m, xr, s, noise);
  const Var ll = sum_steps(gaussian2_log_density(decode_graph(t, m, xr, post.v), t.constant(s_stacked)), c.T);

  std::vector<Var> lp, kl;
  for (int k = 0; k < c.K; ++k) {
    const DiagSeq prior = prior_along_graph(t, m, xr, k, post.v);
    lp.push_back(diag_log_density(post.v, prior));
    kl.push_back(diag_kl(post.q, prior));
  }
  const Var log_prior = concat_or_single(lp);
  const Var log_w = ad::log_softmax_rows(log_prior);
  const Var w = ad::exp(log_w);

  LossGraph g;
  g.term2_rows = ad::row_sum(ad::mul(w, concat_or_single(kl)));
  const Var term3_rows = ad::add_scalar(ad::row_sum(ad::mul(w, log_w)), std::log(static_cast<double>(c.K)));
  g.elbo_rows = ad::sub(ad::sub(ll, g.term2_rows), term3_rows);
  g.term1 = ad::mean(ll);
  g.term2 = ad::mean(g.term2_rows);
  g.term3 = ad::mean(term3_rows);
  g.elbo = ad::mean(g.elbo_rows);

  if (o.frozen_targets) {
    g.targets = *o.frozen_targets;
  } else {
    const Matrix lq = diag_log_density(post.v, post.q).value();
    const Matrix joint = (log_prior.value().colwise() + (ll.value() - lq).col(0));
    g.targets.resize(B, c.K);
    for (Eigen::Index b = 0; b < B; ++b) {
      g.targets.row(b) = responsibilities_from_samples(joint.middleRows(b * o.n_mc, o.n_mc)).transpose();
    }
  }

  const Var log_pi = assignment_graph(t, m, x);
  Var weighted = ad::mul(t.constant(g.targets), ad::clamp(log_pi, kFocalLogFloor, 0.0));
  if (o.gamma_focal != 0.0) {
    const Var one_minus = ad::clamp(ad::add_scalar(ad::neg(ad::exp(log_pi)), 1.0), 1e-12, 1.0);
    weighted = ad::mul(weighted, ad::pow(one_minus, o.gamma_focal));
  }
  g.focal = ad::neg(ad::mean(ad::row_sum(weighted)));
  g.total = ad::add(ad::neg(g.elbo), ad::scale(g.focal, o.alpha));
  return g;
}

LossGraph loss_graph(
  Tape & t, const Model & m, const std::vector<const PreparedScene *> & batch,
  const BatchNoise & noise, const LossOptions & options)
{
  const auto futures = futures_of(batch);
  const Var x = m.encoder.forward(t, inputs_of(batch));
  return loss_graph_from_context(t, m, x, futures, noise, options);
}

LossBreakdown breakdown(const LossGraph & g)
{
  return LossBreakdown{g.total.scalar(), g.elbo.scalar(), g.term1.scalar(),
                       g.term2.scalar(), g.term3.scalar(), g.focal.scalar()};
}

LossBreakdown elbo(
  const Model & m, const std::vector<const PreparedScene *> & batch, int n_mc, std::mt19937_64 & rng)
{
  LossOptions o;
  o.n_mc = n_mc;
  o.alpha = 0.0;
  return total_loss(m, batch, o, rng);
}

LossBreakdown total_loss(
  const Model & m, const std::vector<const PreparedScene *> & batch, const LossOptions & options,
  std::mt19937_64 & rng)
{
  if (options.n_mc < 1) {
    throw invalid_input("n_mc must be >= 1");
  }
  const MixtureConfig & c = m.mixture();
  std::vector<BatchNoise> noise;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    noise.push_back(draw_noise(c.T, options.n_mc, c.d_v, rng));
  }
  Tape t(m.store, false);
  return breakdown(loss_graph(t, m, batch, stack_noise(noise), options));
}

std::string format_metrics(const EpochMetrics & m)
{
  nlohmann::ordered_json j{
    {"epoch", m.epoch}, {"lr", m.lr},         {"total", m.loss.total}, {"term1", m.loss.term1},
    {"term2", m.loss.term2}, {"term3", m.loss.term3}, {"focal", m.loss.focal},
  };
  return j.dump();
}

LossBreakdown batch_gradient(
  const Model & m, const std::vector<const PreparedScene *> & batch,
  const std::vector<BatchNoise> & noise, const TrainConfig & config, std::vector<Matrix> & grads)
{
  const std::size_t n = batch.size();
  const auto chunk = static_cast<std::size_t>(config.chunk_size);
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  LossOptions o;
  o.n_mc = config.n_mc;
  o.alpha = config.alpha;
  o.gamma_focal = config.gamma_focal;

  std::vector<std::vector<Matrix>> chunk_grads(n_chunks);
  std::vector<LossBreakdown> chunk_loss(n_chunks);
  auto run = [&](std::size_t ci) {
    const std::size_t lo = ci * chunk, hi = std::min(n, lo + chunk);
    const std::vector<const PreparedScene *> part(batch.begin() + static_cast<long>(lo), batch.begin() + static_cast<long>(hi));
    const std::vector<BatchNoise> part_noise(noise.begin() + static_cast<long>(lo), noise.begin() + static_cast<long>(hi));
    Tape t(m.store, true);
    const LossGraph g = loss_graph(t, m, part, stack_noise(part_noise), o);
    const double weight = static_cast<double>(hi - lo) / static_cast<double>(n);
    t.backward(ad::scale(g.total, weight));
    chunk_grads[ci] = m.store.zeros_like();
    t.accumulate_param_grads(chunk_grads[ci]);
    chunk_loss[ci] = breakdown(g);
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), n_chunks);
  if (workers <= 1) {
    for (std::size_t ci = 0; ci < n_chunks; ++ci) {
      run(ci);
    }
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t ci = w; ci < n_chunks; ci += workers) {
            run(ci);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto & th : pool) {
      th.join();
    }
    for (auto & e : errors) {
      if (e) {
        std::rethrow_exception(e);
      }
    }
  }

  LossBreakdown total;
  for (std::size_t ci = 0; ci < n_chunks; ++ci) {
    for (std::size_t p = 0; p < grads.size(); ++p) {
      grads[p] += chunk_grads[ci][p];
    }
    const double w =
      static_cast<double>(std::min(n, (ci + 1) * chunk) - ci * chunk) / static_cast<double>(n);
    const LossBreakdown & l = chunk_loss[ci];
    total.total += w * l.total;
    total.elbo += w * l.elbo;
    total.term1 += w * l.term1;
    total.term2 += w * l.term2;
    total.term3 += w * l.term3;
    total.focal += w * l.focal;
  }
  return total;
}

void train(
  Model & model, const std::vector<PreparedScene> & data, const TrainConfig & config,
  TrainState & state, std::ostream * metrics_log, const EpochCallback & on_epoch)
{
  validate(config);
  if (config.epochs > 0 && data.empty()) {
    throw invalid_input("training dataset is empty");
  }
  for (const auto & s : data) {
    require_future(s);
  }
  auto & params = model.store.all();
  if (state.adam_m.empty()) {
    state.adam_m = model.store.zeros_like();
    state.adam_v = model.store.zeros_like();
  }
  if (state.adam_m.size() != params.size()) {
    throw invalid_input("optimizer state does not match the model");
  }
  const MixtureConfig & c = model.mixture();
  const std::size_t n = data.size();
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = state.epoch; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{
      static_cast<std::uint32_t>(config.seed & 0xffffffffu),
      static_cast<std::uint32_t>(config.seed >> 32), static_cast<std::uint32_t>(epoch), 0x5eedu};
    std::mt19937_64 shuffle_rng(seq);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LossBreakdown sum;
    for (std::size_t lo = 0, batch_index = 0; lo < n; lo += bs, ++batch_index) {
      const std::size_t hi = std::min(n, lo + bs);
      std::vector<const PreparedScene *> batch;
      std::vector<BatchNoise> noise;
      for (std::size_t i = lo; i < hi; ++i) {
        batch.push_back(&data[order[i]]);
        noise.push_back(scene_noise(config.seed, epoch, order[i], c.T, config.n_mc, c.d_v));
      }
      std::vector<Matrix> grads = model.store.zeros_like();
      const LossBreakdown l = batch_gradient(model, batch, noise, config, grads);
      if (!finite(l)) {
        throw Error(
          ErrorKind::kNumerical, "non-finite loss at epoch " + std::to_string(epoch + 1) +
                                   " batch " + std::to_string(batch_index));
      }
      ++state.step;
      const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
      const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix & mm = state.adam_m[p];
        Matrix & vv = state.adam_v[p];
        mm = config.adam_beta1 * mm + (1.0 - config.adam_beta1) * grads[p];
        vv = config.adam_beta2 * vv + (1.0 - config.adam_beta2) * grads[p].cwiseProduct(grads[p]);
        params[p].value.array() -=
          lr * (mm.array() / bc1) / ((vv.array() / bc2).sqrt() + config.adam_eps);
      }
      const double w = static_cast<double>(hi - lo) / static_cast<double>(n);
      sum.total += w * l.total;
      sum.elbo += w * l.elbo;
      sum.term1 += w * l.term1;
      sum.term2 += w * l.term2;
      sum.term3 += w * l.term3;
      sum.focal += w * l.focal;
    }
    state.epoch = epoch + 1;
    const EpochMetrics metrics{epoch + 1, lr, sum};
    if (metrics_log) {
      *metrics_log << format_metrics(metrics) << '\n';
      metrics_log->flush();
    }
    if (on_epoch) {
      on_epoch(metrics, model, state);
    }
  }
}

GradCheckResult grad_check(
  Model & m, const std::function<Var(Tape &, const Model &)> & loss, const GradCheckOptions & o)
{
  GradCheckResult result;
  std::vector<Matrix> analytic = m.store.zeros_like();
  {
    Tape t(m.store, true);
    t.backward(loss(t, m));
    t.accumulate_param_grads(analytic);
  }
  auto eval = [&]() {
    Tape t(m.store, false);
    return loss(t, m).scalar();
  };
  for (std::size_t p = 0; p < m.store.size(); ++p) {
    ad::Parameter & param = m.store[p];
    if (o.filter && !o.filter(param.name)) {
      continue;
    }
    for (Eigen::Index i = 0; i < param.value.size(); ++i) {
      const double base = param.value.data()[i];
      param.value.data()[i] = base + o.step;
      const double up = eval();
      param.value.data()[i] = base - o.step;
      const double down = eval();
      param.value.data()[i] = base;
      const double numeric = (up - down) / (2.0 * o.step);
      const double a = analytic[p].data()[i];
      const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), o.floor});
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = param.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace vbmix
