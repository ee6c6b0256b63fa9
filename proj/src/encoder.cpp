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

#include "vbmix/encoder.hpp"

#include "vbmix/error.hpp"

#include <cmath>

namespace vbmix
{

namespace
{

constexpr double kPositionScale = 0.1;  // 1/m
constexpr double kSpeedScale = 0.1;     // s/m
constexpr double kMaskedLogit = -1e9;

using ad::Matrix;
using ad::Tape;
using ad::Var;

/// Additive mask and has-key indicator for attention restricted to one scene.
struct SceneMask
{
  Matrix logits;    // nq x nk, 0 within a scene, kMaskedLogit across scenes
  Matrix has_keys;  // nq x 1, 1 where the query's scene has any key
};

SceneMask scene_mask(const std::vector<int> & q_scene, const std::vector<int> & k_scene)
{
  SceneMask m;
  const auto nq = static_cast<Eigen::Index>(q_scene.size());
  const auto nk = static_cast<Eigen::Index>(k_scene.size());
  m.logits.setConstant(nq, nk, kMaskedLogit);
  m.has_keys.setZero(nq, 1);
  for (Eigen::Index i = 0; i < nq; ++i) {
    for (Eigen::Index j = 0; j < nk; ++j) {
      if (q_scene[static_cast<std::size_t>(i)] == k_scene[static_cast<std::size_t>(j)]) {
        m.logits(i, j) = 0.0;
        m.has_keys(i, 0) = 1.0;
      }
    }
  }
  return m;
}

}  // namespace

void validate(const EncoderConfig & c)
{
  if (c.d_model < 2 || c.d_model % 2 != 0) {
    throw invalid_config("encoder d_model must be even and >= 2");
  }
  if (c.n_heads < 1 || c.d_model % c.n_heads != 0) {
    throw invalid_config("encoder d_model must be divisible by n_heads");
  }
  if (c.subgraph_depth < 1 || c.n_levels < 1 || c.max_neighbors < 0 || c.max_polylines < 1 ||
      c.max_polyline_vectors < 1) {
    throw invalid_config("encoder counts must be >= 1");
  }
}

ad::Matrix agent_node_features(const AgentTrack & track)
{
  if (track.states.empty()) {
    throw invalid_input("agent track " + track.agent_id + " is empty");
  }
  const auto n = static_cast<Eigen::Index>(track.states.size());
  Matrix f(n, kAgentFeatures);
  for (Eigen::Index i = 0; i < n; ++i) {
    const MotionState & s = track.states[static_cast<std::size_t>(i)];
    f.row(i) << s.x * kPositionScale, s.y * kPositionScale, std::cos(s.heading),
      std::sin(s.heading), s.vx * kSpeedScale, s.vy * kSpeedScale,
      static_cast<double>(i + 1) / static_cast<double>(n);
  }
  return f;
}

ad::Matrix map_node_features(const MapPolyline & polyline)
{
  if (polyline.vectors.empty()) {
    throw invalid_input("map polyline is empty");
  }
  const auto n = static_cast<Eigen::Index>(polyline.vectors.size());
  Matrix f(n, kMapFeatures);
  for (Eigen::Index i = 0; i < n; ++i) {
    const MapVector & v = polyline.vectors[static_cast<std::size_t>(i)];
    f.row(i) << v.head.x(), v.head.y(), v.tail.x(), v.tail.y();
  }
  return f * kPositionScale;
}

EncoderInput make_encoder_input(const Scene & scene, const EncoderConfig & config)
{
  if (static_cast<int>(scene.neighbors.size()) > config.max_neighbors) {
    throw invalid_input(
      "scene " + scene.scene_id + " has " + std::to_string(scene.neighbors.size()) +
      " neighbors, max_neighbors=" + std::to_string(config.max_neighbors));
  }
  const auto pieces =
    split_polylines(scene.map, static_cast<std::size_t>(config.max_polyline_vectors));
  if (static_cast<int>(pieces.size()) > config.max_polylines) {
    throw invalid_input(
      "scene " + scene.scene_id + " has " + std::to_string(pieces.size()) +
      " polyline pieces, max_polylines=" + std::to_string(config.max_polylines));
  }
  EncoderInput in;
  std::vector<Matrix> agents{agent_node_features(scene.target)};
  for (const auto & n : scene.neighbors) {
    agents.push_back(agent_node_features(n));
  }
  Eigen::Index rows = 0;
  for (const auto & a : agents) {
    rows += a.rows();
  }
  in.agent_nodes.resize(rows, kAgentFeatures);
  rows = 0;
  for (const auto & a : agents) {
    in.agent_nodes.middleRows(rows, a.rows()) = a;
    in.agent_sizes.push_back(a.rows());
    rows += a.rows();
  }
  rows = 0;
  for (const auto & p : pieces) {
    rows += static_cast<Eigen::Index>(p.vectors.size());
  }
  in.map_nodes.resize(rows, kMapFeatures);
  rows = 0;
  for (const auto & p : pieces) {
    const Matrix f = map_node_features(p);
    in.map_nodes.middleRows(rows, f.rows()) = f;
    in.map_sizes.push_back(f.rows());
    rows += f.rows();
  }
  return in;
}

Subgraph Subgraph::create(
  ad::ParamStore & store, nn::Initializer & init, const std::string & name, Eigen::Index in,
  int depth, Eigen::Index width)
{
  Subgraph s;
  for (int i = 0; i < depth; ++i) {
    const std::string layer = name + "." + std::to_string(i);
    s.layers.push_back(nn::Linear::create(store, init, layer, {i == 0 ? in : width}, width / 2));
    s.norms.push_back(nn::LayerNorm::create(store, layer + ".norm", width / 2));
  }
  return s;
}

Var Subgraph::operator()(Tape & t, Var nodes, const std::vector<Eigen::Index> & sizes) const
{
  std::vector<Eigen::Index> owner;
  owner.reserve(static_cast<std::size_t>(nodes.rows()));
  for (std::size_t e = 0; e < sizes.size(); ++e) {
    owner.insert(owner.end(), static_cast<std::size_t>(sizes[e]), static_cast<Eigen::Index>(e));
  }
  Var h = nodes;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Var local = ad::silu(norms[i](t, layers[i](t, h)));
    Var pooled = ad::segment_max_rows(local, sizes);
    h = ad::concat_cols({local, ad::gather_rows(pooled, owner)});
  }
  return ad::segment_max_rows(h, sizes);
}

AttentionBlock AttentionBlock::create(
  ad::ParamStore & store, nn::Initializer & init, const std::string & name, Eigen::Index width,
  int heads)
{
  AttentionBlock b;
  b.query_norm = nn::LayerNorm::create(store, name + ".qnorm", width);
  b.key_norm = nn::LayerNorm::create(store, name + ".knorm", width);
  b.attention = nn::MultiHeadAttention::create(store, init, name + ".mha", width, heads);
  return b;
}

Encoder Encoder::create(ad::ParamStore & store, nn::Initializer & init, const EncoderConfig & config)
{
  validate(config);
  Encoder e;
  e.config_ = config;
  const Eigen::Index d = config.d_model;
  e.agent_subgraph_ =
    Subgraph::create(store, init, "enc.agent", kAgentFeatures, config.subgraph_depth, d);
  e.map_subgraph_ = Subgraph::create(store, init, "enc.map", kMapFeatures, config.subgraph_depth, d);
  for (int l = 0; l < config.n_levels; ++l) {
    const std::string p = "enc.level" + std::to_string(l);
    Level lv;
    lv.a2m = AttentionBlock::create(store, init, p + ".a2m", d, config.n_heads);
    lv.m2m = AttentionBlock::create(store, init, p + ".m2m", d, config.n_heads);
    lv.m2a = AttentionBlock::create(store, init, p + ".m2a", d, config.n_heads);
    lv.a2a = AttentionBlock::create(store, init, p + ".a2a", d, config.n_heads);
    e.levels_.push_back(lv);
  }
  return e;
}

Var Encoder::block(
  Tape & t, const AttentionBlock & b, Var queries, Var keys, const Matrix & mask,
  const Matrix & has_keys) const
{
  Var update = b.attention(t, b.query_norm(t, queries), b.key_norm(t, keys), &mask);
  // Queries whose scene has no keys keep their token unchanged.
  if (has_keys.minCoeff() < 1.0) {
    update = ad::mul_col(update, t.constant(has_keys));
  }
  return ad::add(queries, update);
}

Var Encoder::forward(Tape & t, const std::vector<const EncoderInput *> & batch) const
{
  if (batch.empty()) {
    throw invalid_input("encoder batch is empty");
  }
  Eigen::Index agent_rows = 0, map_rows = 0;
  std::vector<Eigen::Index> agent_sizes, map_sizes, target_rows;
  std::vector<int> agent_scene, map_scene;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const EncoderInput & in = *batch[b];
    if (in.agent_sizes.empty()) {
      throw invalid_input("encoder input without a target agent");
    }
    target_rows.push_back(static_cast<Eigen::Index>(agent_sizes.size()));
    agent_sizes.insert(agent_sizes.end(), in.agent_sizes.begin(), in.agent_sizes.end());
    map_sizes.insert(map_sizes.end(), in.map_sizes.begin(), in.map_sizes.end());
    agent_scene.insert(agent_scene.end(), in.agent_sizes.size(), static_cast<int>(b));
    map_scene.insert(map_scene.end(), in.map_sizes.size(), static_cast<int>(b));
    agent_rows += in.agent_nodes.rows();
    map_rows += in.map_nodes.rows();
  }
  Matrix agent_nodes(agent_rows, kAgentFeatures), map_nodes(map_rows, kMapFeatures);
  agent_rows = map_rows = 0;
  for (const EncoderInput * in : batch) {
    agent_nodes.middleRows(agent_rows, in->agent_nodes.rows()) = in->agent_nodes;
    agent_rows += in->agent_nodes.rows();
    if (in->map_nodes.rows() > 0) {
      map_nodes.middleRows(map_rows, in->map_nodes.rows()) = in->map_nodes;
      map_rows += in->map_nodes.rows();
    }
  }

  Var agents = agent_subgraph_(t, t.constant(std::move(agent_nodes)), agent_sizes);
  if (map_sizes.empty()) {
    const SceneMask aa = scene_mask(agent_scene, agent_scene);
    for (const Level & lv : levels_) {
      agents = block(t, lv.a2a, agents, agents, aa.logits, aa.has_keys);
    }
    return ad::gather_rows(agents, target_rows);
  }
  Var map = map_subgraph_(t, t.constant(std::move(map_nodes)), map_sizes);
  const SceneMask am = scene_mask(agent_scene, map_scene);
  const SceneMask mm = scene_mask(map_scene, map_scene);
  const SceneMask ma = scene_mask(map_scene, agent_scene);
  const SceneMask aa = scene_mask(agent_scene, agent_scene);
  for (const Level & lv : levels_) {
    agents = block(t, lv.a2m, agents, map, am.logits, am.has_keys);
    map = block(t, lv.m2m, map, map, mm.logits, mm.has_keys);
    map = block(t, lv.m2a, map, agents, ma.logits, ma.has_keys);
    agents = block(t, lv.a2a, agents, agents, aa.logits, aa.has_keys);
  }
  return ad::gather_rows(agents, target_rows);
}

Var Encoder::encode_agent(Tape & t, const AgentTrack & track) const
{
  const Matrix f = agent_node_features(track);
  return agent_subgraph_(t, t.constant(f), {f.rows()});
}

Var Encoder::encode_polyline(Tape & t, const MapPolyline & polyline) const
{
  const Matrix f = map_node_features(polyline);
  return map_subgraph_(t, t.constant(f), {f.rows()});
}

}  // namespace vbmix
