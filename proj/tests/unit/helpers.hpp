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

#ifndef VBMIX_TESTS__HELPERS_HPP_
#define VBMIX_TESTS__HELPERS_HPP_

#include "vbmix/autodiff.hpp"
#include "vbmix/mixture.hpp"
#include "vbmix/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vbmix::test
{

inline ModelConfig toy_config(int K = 2, int d_v = 2, int T = 3, int d_model = 8, int H = 4)
{
  ModelConfig c;
  c.encoder.d_model = d_model;
  c.encoder.n_heads = 2;
  c.encoder.subgraph_depth = 2;
  c.encoder.n_levels = 1;
  c.mixture.K = K;
  c.mixture.d_v = d_v;
  c.mixture.d_x = d_model;
  c.mixture.T = T;
  c.mixture.H = H;
  c.mixture.hidden = 8;
  c.init_seed = 3;
  return c;
}

inline GeneratorConfig toy_generator(int n, int T = 3, int H = 4, std::uint64_t seed = 11)
{
  GeneratorConfig g;
  g.seed = seed;
  g.n_scenes = n;
  g.history = H;
  g.future = T;
  g.step_seconds = 1.0;
  return g;
}

inline std::vector<PreparedScene> prepared(const std::vector<Scene> & scenes, const ModelConfig & c)
{
  std::vector<PreparedScene> out;
  for (const auto & s : scenes) {
    out.push_back(prepare_scene(s, c));
  }
  return out;
}

inline std::vector<const PreparedScene *> pointers(const std::vector<PreparedScene> & v)
{
  std::vector<const PreparedScene *> out;
  for (const auto & p : v) {
    out.push_back(&p);
  }
  return out;
}

inline ad::Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64 & rng, double scale = 1.0)
{
  std::normal_distribution<double> n(0.0, scale);
  ad::Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) {
      m(i, j) = n(rng);
    }
  }
  return m;
}

inline Eigen::VectorXd random_simplex(int K, std::mt19937_64 & rng)
{
  std::gamma_distribution<double> g(1.0, 1.0);
  Eigen::VectorXd v(K);
  for (int k = 0; k < K; ++k) {
    v(k) = g(rng) + 1e-3;
  }
  return v / v.sum();
}

/// Central-difference gradient of a scalar function of a matrix.
inline ad::Matrix numeric_gradient(
  const std::function<double(const ad::Matrix &)> & f, ad::Matrix x, double h = 1e-6)
{
  ad::Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = f(x);
    x(i) = keep - h;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline void set_param(Model & m, const std::string & name, const ad::Matrix & value)
{
  ad::Matrix & dst = m.store[m.store.index_of(name)].value;
  if (dst.rows() != value.rows() || dst.cols() != value.cols()) {
    throw std::runtime_error("shape mismatch for " + name);
  }
  dst = value;
}

inline void zero_param(Model & m, const std::string & name)
{
  m.store[m.store.index_of(name)].value.setZero();
}

/// Raw network output that the smooth log-std bound maps to `log_std`.
inline double raw_log_std(double log_std) { return kLogStdBound * std::atanh(log_std / kLogStdBound); }

inline ad::Matrix diag_bias(const Eigen::VectorXd & mean, const Eigen::VectorXd & log_std)
{
  ad::Matrix b(1, 2 * mean.size());
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    b(0, j) = mean(j);
    b(0, mean.size() + j) = raw_log_std(log_std(j));
  }
  return b;
}

/// Every step of prior k becomes N(mean, diag(exp(log_std))^2), independent of x and v.
inline void fix_prior(Model & m, int k, const Eigen::VectorXd & mean, const Eigen::VectorXd & log_std)
{
  const std::string p = "prior" + std::to_string(k);
  zero_param(m, p + ".init.1.w");
  set_param(m, p + ".init.1.b", diag_bias(mean, log_std));
  zero_param(m, p + ".head.w0");
  zero_param(m, p + ".head.w1");
  set_param(m, p + ".head.b", diag_bias(mean, log_std));
}

/// Every posterior step becomes N(mean, diag(exp(log_std))^2).
inline void fix_posterior(Model & m, const Eigen::VectorXd & mean, const Eigen::VectorXd & log_std)
{
  zero_param(m, "post.first.1.w");
  set_param(m, "post.first.1.b", diag_bias(mean, log_std));
  zero_param(m, "post.head.w0");
  zero_param(m, "post.head.w1");
  set_param(m, "post.head.b", diag_bias(mean, log_std));
}

/// Decoder output layer emits a constant step Gaussian.
inline void fix_decoder(Model & m, const Eigen::Vector2d & mean, double log_l11, double l21, double log_l22)
{
  const std::string last = "dec." + std::to_string(m.decoder.layers.size() - 1);
  const bool grouped = m.decoder.layers.size() == 1;
  if (grouped) {
    zero_param(m, last + ".w0");
    zero_param(m, last + ".w1");
  } else {
    zero_param(m, last + ".w");
  }
  ad::Matrix b(1, 5);
  b << mean.x(), mean.y(), raw_log_std(log_l11), l21, raw_log_std(log_l22);
  set_param(m, last + ".b", b);
}

/// Copies every parameter of prior `from` onto prior `to`.
inline void copy_prior(Model & m, int from, int to)
{
  const std::string a = "prior" + std::to_string(from) + ".";
  const std::string b = "prior" + std::to_string(to) + ".";
  for (auto & p : m.store.all()) {
    if (p.name.rfind(b, 0) == 0) {
      p.value = m.store[m.store.index_of(a + p.name.substr(b.size()))].value;
    }
  }
}

inline std::string slurp(const std::filesystem::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path & p, const std::string & text)
{
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Fresh empty directory under the test working directory.
inline std::filesystem::path scratch_dir(const std::string & name)
{
  const auto p = std::filesystem::current_path() / ("scratch_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace vbmix::test

#endif  // VBMIX_TESTS__HELPERS_HPP_
