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

#include "vbmix/config.hpp"
#include "vbmix/error.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace vbmix;

namespace
{

std::string error_of(const std::string & text)
{
  try {
    parse_run_config(text, "test.ini");
  } catch (const Error & e) {
    CHECK(e.kind() == ErrorKind::kInvalidConfig);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults follow the reference training setup")
{
  const RunConfig c;
  CHECK(c.train.lr == 1e-4);
  CHECK(c.train.batch_size == 64);
  CHECK(c.train.epochs == 20);
  CHECK(c.train.decay_rate == 0.3);
  CHECK(c.train.decay_step == 5);
  CHECK(c.sampling.M == 6);
  CHECK(c.sampling.radius == 1.4);
  CHECK(c.sampling.iou_threshold == 0.0);
  CHECK(c.sampling.resolution == 0.5);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("config files override defaults by section")
{
  const RunConfig c = parse_run_config(
    "[train]\nlr = 0.001\nepochs = 3\n\n[mixture]\nK = 4\n[generator]\ngeometry = merge\n"
    "ood_radius = 30\n");
  CHECK(c.train.lr == 1e-3);
  CHECK(c.train.epochs == 3);
  CHECK(c.mixture.K == 4);
  CHECK(c.generator.geometry == Geometry::kMerge);
  REQUIRE(c.ood_radius.has_value());
  CHECK(*c.ood_radius == 30.0);
  CHECK(c.train.batch_size == 64);
  CHECK(parse_run_config("") == RunConfig{});
}

TEST_CASE("formatted configs parse back to the same values")
{
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> small(1, 9);
  std::uniform_real_distribution<double> real(0.01, 3.0);
  for (int i = 0; i < 50; ++i) {
    RunConfig c;
    c.train.lr = real(rng) * 1e-3;
    c.train.epochs = small(rng);
    c.train.seed = rng();
    c.mixture.K = small(rng);
    c.encoder.n_heads = 2;
    c.encoder.d_model = 8 * small(rng);
    c.sampling.radius = real(rng);
    c.eval.region.x_min = -real(rng);
    c.generator.noise_std = real(rng) / 7.0;
    if (i % 2 == 0) c.ood_lane_offset = real(rng);
    const std::string text = format_run_config(c);
    CHECK(parse_run_config(text) == c);
    CHECK(format_run_config(parse_run_config(text)) == text);
  }
}

TEST_CASE("unknown keys and bad values name their location")
{
  CHECK(error_of("[train]\nlearning_rate = 1\n").find("[train] learning_rate") != std::string::npos);
  CHECK(error_of("[nope]\nx = 1\n").find("[nope] x") != std::string::npos);
  CHECK(error_of("[train]\nepochs = many\n").find("[train] epochs") != std::string::npos);
  CHECK(error_of("[generator]\ngeometry = spiral\n").find("[generator] geometry") != std::string::npos);
  CHECK(error_of("lr = 1\n").find("outside a section") != std::string::npos);
  CHECK_FALSE(error_of("[train\nlr = 1\n").empty());

  RunConfig c;
  CHECK_THROWS_AS(set_config_value(c, "train", "epochs", "2.5"), Error);
  set_config_value(c, "train", "epochs", "7");
  CHECK(c.train.epochs == 7);
}

TEST_CASE("validation rejects inconsistent settings")
{
  RunConfig c;
  c.encoder.n_heads = 5;
  CHECK_THROWS_AS(validate(c), Error);
  c = RunConfig{};
  c.eval.heatmap_resolution = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = RunConfig{};
  c.sampling.M = 0;
  CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("missing config files are I/O errors")
{
  try {
    load_run_config("definitely/not/here.ini");
    FAIL("expected an error");
  } catch (const Error & e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}

TEST_CASE("OOD parameters resolve from defaults or overrides")
{
  RunConfig c;
  CHECK_FALSE(resolved_generator(c).ood_params.has_value());
  c.generator.ood_fraction = 0.35;
  c.generator.geometry = Geometry::kArcChoice;
  const GeneratorConfig g = resolved_generator(c);
  REQUIRE(g.ood_params.has_value());
  CHECK(g.ood_params->radius == 35.0);
  CHECK(default_ood_params(Geometry::kFork, GeometryParams{}).ramp_length == 30.0);
  CHECK(default_ood_params(Geometry::kMerge, GeometryParams{}).lane_offset == 12.0);

  c.ood_radius = 27.0;
  const GeneratorConfig o = resolved_generator(c);
  CHECK(o.ood_params->radius == 27.0);
  CHECK(o.ood_params->ramp_length == c.generator.params.ramp_length);
}

TEST_CASE("model settings take horizons from data and width from the encoder")
{
  RunConfig c;
  c.encoder.d_model = 32;
  c.encoder.n_heads = 4;
  c.train.seed = 99;
  const ModelConfig m = model_config(c, Horizons{5, 7});
  CHECK(m.mixture.d_x == 32);
  CHECK(m.mixture.H == 5);
  CHECK(m.mixture.T == 7);
  CHECK(m.init_seed == 99);
  CHECK_NOTHROW(validate(m));
}
