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

#ifndef VBMIX__NN_HPP_
#define VBMIX__NN_HPP_

#include "vbmix/autodiff.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace vbmix::nn
{

using ad::ParamStore;
using ad::Tape;
using ad::Var;

/// Deterministic parameter initializer shared by all modules of one model.
class Initializer
{
public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  /// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  ad::Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out);

private:
  std::mt19937_64 rng_;
};

/// Affine map whose input is split into named column groups, so a shared
/// context block can be projected once and reused across time steps.
struct Linear
{
  static constexpr std::size_t kNoBias = static_cast<std::size_t>(-1);

  std::vector<std::size_t> weights;  // one (in_i x out) block per input group
  std::size_t bias = kNoBias;
  Eigen::Index out = 0;

  static Linear create(
    ParamStore & store, Initializer & init, const std::string & name,
    const std::vector<Eigen::Index> & in_groups, Eigen::Index out, bool with_bias = true);

  bool has_bias() const { return bias != kNoBias; }

  /// Single input group.
  Var operator()(Tape & t, Var x) const;
  /// x_i W_i summed over the groups listed, plus the bias if `with_bias`.
  Var partial(Tape & t, const std::vector<std::pair<std::size_t, Var>> & inputs, bool with_bias) const;
};

/// Linear -> SiLU repeated, ending with a linear output layer.
struct Mlp
{
  std::vector<Linear> layers;

  static Mlp create(
    ParamStore & store, Initializer & init, const std::string & name,
    const std::vector<Eigen::Index> & in_groups, Eigen::Index hidden,
    int hidden_layers, Eigen::Index out);

  Var operator()(Tape & t, Var x) const;
  /// Runs the network on an input whose first-layer projection is given.
  Var from_preactivation(Tape & t, Var first_layer_pre) const;
};

/// Learnable gain and bias after row standardization.
struct LayerNorm
{
  std::size_t gain = 0;
  std::size_t bias = 0;

  static LayerNorm create(ParamStore & store, const std::string & name, Eigen::Index width);
  Var operator()(Tape & t, Var x) const;
};

struct LstmState
{
  Var h;
  Var c;
};

/// LSTM cell; gate order in the fused projection is (input, forget, cell, output).
struct LstmCell
{
  Linear gates;
  Eigen::Index hidden = 0;

  static LstmCell create(
    ParamStore & store, Initializer & init, const std::string & name,
    const std::vector<Eigen::Index> & in_groups, Eigen::Index hidden);

  LstmState zero_state(Tape & t, Eigen::Index rows) const;
  /// `pre` is the already-projected input (rows x 4*hidden) excluding the
  /// recurrent term.
  LstmState step(Tape & t, Var pre, const LstmState & s) const;
  std::size_t recurrent_weight = 0;
};

struct MultiHeadAttention
{
  Linear q, k, v, o;
  int heads = 1;

  static MultiHeadAttention create(
    ParamStore & store, Initializer & init, const std::string & name, Eigen::Index width,
    int heads);

  /// queries (nq x d), keys/values (nk x d) -> (nq x d). `mask` (nq x nk)
  /// is added to every head's logits when given.
  Var operator()(Tape & t, Var queries, Var keys, const ad::Matrix * mask = nullptr) const;
};

}  // namespace vbmix::nn

#endif  // VBMIX__NN_HPP_
