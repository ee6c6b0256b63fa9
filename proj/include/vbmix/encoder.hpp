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

#ifndef VBMIX__ENCODER_HPP_
#define VBMIX__ENCODER_HPP_

// Scene context encoder.
//
// Agents and map polylines are each reduced to one token by a subgraph
// network: per-node layers followed by a max-pool whose result is appended
// back to every node. Tokens then pass through `n_levels` levels of
// pre-norm residual attention blocks in the order agent->map, map->map,
// map->agent, agent->agent. The target token after the last level is x.
//
// Scenes are encoded in batches: entities of all scenes are stacked and an
// additive mask keeps attention within each scene.

#include "vbmix/autodiff.hpp"
#include "vbmix/nn.hpp"
#include "vbmix/scene.hpp"

#include <cstddef>
#include <vector>

namespace vbmix
{

struct EncoderConfig
{
  int d_model = 64;
  int subgraph_depth = 3;
  int n_levels = 2;
  int n_heads = 4;
  int max_neighbors = 16;
  int max_polylines = 64;
  /// Longer polylines are split into pieces of at most this many vectors.
  int max_polyline_vectors = 10;

  bool operator==(const EncoderConfig &) const = default;
};

/// Throws Error(kInvalidConfig).
void validate(const EncoderConfig & config);

/// Node features of one normalized scene. Agent entity 0 is the target.
struct EncoderInput
{
  ad::Matrix agent_nodes;                 // (sum of agent sizes) x kAgentFeatures
  std::vector<Eigen::Index> agent_sizes;  // nodes per agent
  ad::Matrix map_nodes;                   // (sum of map sizes) x kMapFeatures
  std::vector<Eigen::Index> map_sizes;    // vectors per polyline piece
};

inline constexpr Eigen::Index kAgentFeatures = 7;  // x, y, cos h, sin h, vx, vy, step
inline constexpr Eigen::Index kMapFeatures = 4;    // head xy, tail xy

/// Builds encoder features from a scene already in the target frame.
/// Throws Error(kInvalidInput) if the neighbor or polyline limit is exceeded.
EncoderInput make_encoder_input(const Scene & normalized, const EncoderConfig & config);

/// Features of a single track or polyline as its own entity.
ad::Matrix agent_node_features(const AgentTrack & track);
ad::Matrix map_node_features(const MapPolyline & polyline);

struct Subgraph
{
  std::vector<nn::Linear> layers;
  std::vector<nn::LayerNorm> norms;

  static Subgraph create(
    ad::ParamStore & store, nn::Initializer & init, const std::string & name,
    Eigen::Index in, int depth, Eigen::Index width);

  /// nodes stacked over entities -> one (entities x width) token matrix.
  ad::Var operator()(ad::Tape & t, ad::Var nodes, const std::vector<Eigen::Index> & sizes) const;
};

struct AttentionBlock
{
  nn::LayerNorm query_norm;
  nn::LayerNorm key_norm;
  nn::MultiHeadAttention attention;

  static AttentionBlock create(
    ad::ParamStore & store, nn::Initializer & init, const std::string & name,
    Eigen::Index width, int heads);
};

class Encoder
{
public:
  static Encoder create(ad::ParamStore & store, nn::Initializer & init, const EncoderConfig & config);

  const EncoderConfig & config() const { return config_; }

  /// One row of x per input, in input order.
  ad::Var forward(ad::Tape & t, const std::vector<const EncoderInput *> & batch) const;

  /// Token of a single entity, for inspection and tests.
  ad::Var encode_agent(ad::Tape & t, const AgentTrack & track) const;
  ad::Var encode_polyline(ad::Tape & t, const MapPolyline & polyline) const;

private:
  ad::Var block(
    ad::Tape & t, const AttentionBlock & b, ad::Var queries, ad::Var keys,
    const ad::Matrix & mask, const ad::Matrix & has_keys) const;

  EncoderConfig config_;
  Subgraph agent_subgraph_;
  Subgraph map_subgraph_;
  struct Level
  {
    AttentionBlock a2m, m2m, m2a, a2a;
  };
  std::vector<Level> levels_;
};

}  // namespace vbmix

#endif  // VBMIX__ENCODER_HPP_
