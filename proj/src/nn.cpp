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

#include "vbmix/nn.hpp"

#include <cassert>
#include <cmath>
#include <optional>

namespace vbmix::nn
{

ad::Matrix Initializer::glorot(Eigen::Index fan_in, Eigen::Index fan_out)
{
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  ad::Matrix m(fan_in, fan_out);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = dist(rng_);
    }
  }
  return m;
}

Linear Linear::create(
  ParamStore & store, Initializer & init, const std::string & name,
  const std::vector<Eigen::Index> & in_groups, Eigen::Index out, bool with_bias)
{
  Linear l;
  l.out = out;
  Eigen::Index fan_in = 0;
  for (auto g : in_groups) {
    fan_in += g;
  }
  for (std::size_t i = 0; i < in_groups.size(); ++i) {
    // Glorot scale uses the full fan-in across groups.
    ad::Matrix w = init.glorot(fan_in, out).topRows(in_groups[i]);
    const std::string suffix = in_groups.size() == 1 ? "" : std::to_string(i);
    l.weights.push_back(store.add(name + ".w" + suffix, std::move(w)));
  }
  if (with_bias) {
    l.bias = store.add(name + ".b", ad::Matrix::Zero(1, out));
  }
  return l;
}

Var Linear::operator()(Tape & t, Var x) const
{
  assert(weights.size() == 1);
  return partial(t, {{0, x}}, true);
}

Var Linear::partial(
  Tape & t, const std::vector<std::pair<std::size_t, Var>> & inputs, bool with_bias) const
{
  assert(!inputs.empty());
  Var acc = ad::matmul(inputs[0].second, t.param(weights[inputs[0].first]));
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    acc = ad::add(acc, ad::matmul(inputs[i].second, t.param(weights[inputs[i].first])));
  }
  if (with_bias && has_bias()) {
    acc = ad::add_row(acc, t.param(bias));
  }
  return acc;
}

Mlp Mlp::create(
  ParamStore & store, Initializer & init, const std::string & name,
  const std::vector<Eigen::Index> & in_groups, Eigen::Index hidden, int hidden_layers,
  Eigen::Index out)
{
  Mlp m;
  if (hidden_layers == 0) {
    m.layers.push_back(Linear::create(store, init, name + ".0", in_groups, out));
    return m;
  }
  m.layers.push_back(Linear::create(store, init, name + ".0", in_groups, hidden));
  for (int i = 1; i < hidden_layers; ++i) {
    m.layers.push_back(
      Linear::create(store, init, name + "." + std::to_string(i), {hidden}, hidden));
  }
  m.layers.push_back(
    Linear::create(store, init, name + "." + std::to_string(hidden_layers), {hidden}, out));
  return m;
}

Var Mlp::operator()(Tape & t, Var x) const
{
  return from_preactivation(t, layers.front()(t, x));
}

Var Mlp::from_preactivation(Tape & t, Var first_layer_pre) const
{
  Var h = first_layer_pre;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    h = layers[i](t, ad::silu(h));
  }
  return h;
}

LayerNorm LayerNorm::create(ParamStore & store, const std::string & name, Eigen::Index width)
{
  LayerNorm n;
  n.gain = store.add(name + ".gain", ad::Matrix::Ones(1, width));
  n.bias = store.add(name + ".bias", ad::Matrix::Zero(1, width));
  return n;
}

Var LayerNorm::operator()(Tape & t, Var x) const
{
  Var y = ad::layer_norm_rows(x);
  Var g = ad::broadcast_rows(t.param(gain), x.rows());
  return ad::add_row(ad::mul(y, g), t.param(bias));
}

LstmCell LstmCell::create(
  ParamStore & store, Initializer & init, const std::string & name,
  const std::vector<Eigen::Index> & in_groups, Eigen::Index hidden)
{
  LstmCell c;
  c.hidden = hidden;
  c.gates = Linear::create(store, init, name + ".in", in_groups, 4 * hidden);
  c.recurrent_weight = store.add(name + ".rec", init.glorot(hidden, 4 * hidden));
  // Forget-gate bias of one keeps early gradients flowing through the cell.
  store[c.gates.bias].value.middleCols(hidden, hidden).setOnes();
  return c;
}

LstmState LstmCell::zero_state(Tape & t, Eigen::Index rows) const
{
  Var z = t.constant(ad::Matrix::Zero(rows, hidden));
  return LstmState{z, z};
}

LstmState LstmCell::step(Tape & t, Var pre, const LstmState & s) const
{
  Var g = ad::add(pre, ad::matmul(s.h, t.param(recurrent_weight)));
  Var i = ad::sigmoid(ad::slice_cols(g, 0, hidden));
  Var f = ad::sigmoid(ad::slice_cols(g, hidden, hidden));
  Var cand = ad::tanh(ad::slice_cols(g, 2 * hidden, hidden));
  Var o = ad::sigmoid(ad::slice_cols(g, 3 * hidden, hidden));
  Var c = ad::add(ad::mul(f, s.c), ad::mul(i, cand));
  Var h = ad::mul(o, ad::tanh(c));
  return LstmState{h, c};
}

MultiHeadAttention MultiHeadAttention::create(
  ParamStore & store, Initializer & init, const std::string & name, Eigen::Index width,
  int heads)
{
  MultiHeadAttention m;
  m.heads = heads;
  m.q = Linear::create(store, init, name + ".q", {width}, width);
  // A key bias shifts every logit of a query equally and cancels in the softmax.
  m.k = Linear::create(store, init, name + ".k", {width}, width, false);
  m.v = Linear::create(store, init, name + ".v", {width}, width);
  m.o = Linear::create(store, init, name + ".o", {width}, width);
  return m;
}

Var MultiHeadAttention::operator()(Tape & t, Var queries, Var keys, const ad::Matrix * mask) const
{
  const std::optional<Var> bias = mask ? std::optional<Var>(t.constant(*mask)) : std::nullopt;
  Var qp = q(t, queries);
  Var kp = k(t, keys);
  Var vp = v(t, keys);
  const Eigen::Index width = qp.cols();
  const Eigen::Index dh = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = ad::slice_cols(qp, h * dh, dh);
    Var kh = ad::slice_cols(kp, h * dh, dh);
    Var vh = ad::slice_cols(vp, h * dh, dh);
    Var logits = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    if (bias) {
      logits = ad::add(logits, *bias);
    }
    outs.push_back(ad::matmul(ad::softmax_rows(logits), vh));
  }
  Var merged = heads == 1 ? outs.front() : ad::concat_cols(outs);
  return o(t, merged);
}

}  // namespace vbmix::nn
