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

#ifndef VBMIX__CONFIG_HPP_
#define VBMIX__CONFIG_HPP_

#include "vbmix/encoder.hpp"
#include "vbmix/evaluation.hpp"
#include "vbmix/mixture.hpp"
#include "vbmix/sampling.hpp"
#include "vbmix/synthetic.hpp"
#include "vbmix/training.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace vbmix
{

struct EvalConfig
{
  int n_mc = 16;  // prior paths per component for entropy estimates
  std::string miss_rate = "interaction";
  Region region;
  double heatmap_resolution = 0.5;
  int heatmap_top_c = 6;

  bool operator==(const EvalConfig & o) const
  {
    return n_mc == o.n_mc && miss_rate == o.miss_rate && region.x_min == o.region.x_min &&
           region.x_max == o.region.x_max && region.y_min == o.region.y_min &&
           region.y_max == o.region.y_max && heatmap_resolution == o.heatmap_resolution &&
           heatmap_top_c == o.heatmap_top_c;
  }
};

/// Every tunable of a run. Files use INI sections [generator], [encoder],
/// [mixture], [train], [sampling] and [eval]; keys match the field names
/// below. Mixture T and H come from the scene file header and d_x from the
/// encoder width, so they are not keys.
struct RunConfig
{
  GeneratorConfig generator;
  // OOD geometry overrides; unset fields fall back to default_ood_params.
  std::optional<double> ood_radius;
  std::optional<double> ood_ramp_length;
  std::optional<double> ood_lane_offset;
  EncoderConfig encoder;
  MixtureConfig mixture;
  TrainConfig train;
  SamplingConfig sampling;
  EvalConfig eval;

  bool operator==(const RunConfig & o) const = default;
};

/// Shifts the parameter that matters for the geometry: arc radius 20 -> 35,
/// ramp length 15 -> 30, lane offset 8 -> 12 (defaults shown).
GeometryParams default_ood_params(Geometry g, const GeometryParams & base);

/// Generator settings with the OOD parameters resolved; ood_params is set
/// only when ood_fraction > 0 or an override is present.
GeneratorConfig resolved_generator(const RunConfig & config);

/// Model configuration for data with the given horizons.
ModelConfig model_config(const RunConfig & config, const Horizons & horizons);

/// Throws Error(kInvalidConfig) naming the section and key for unknown keys
/// and unparsable values.
RunConfig parse_run_config(const std::string & text, const std::string & origin = "<memory>");
RunConfig load_run_config(const std::filesystem::path & path);

/// Sets one `section.key`; same errors as parsing.
void set_config_value(RunConfig & config, const std::string & section, const std::string & key,
                      const std::string & value);

/// Every key with its effective value; parses back to an equal RunConfig.
std::string format_run_config(const RunConfig & config);

/// Validates every section; throws Error(kInvalidConfig).
void validate(const RunConfig & config);

}  // namespace vbmix

#endif  // VBMIX__CONFIG_HPP_
