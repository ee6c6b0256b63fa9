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

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace vbmix
{

namespace
{

std::string where(const std::string & section, const std::string & key)
{
  return "[" + section + "] " + key;
}

template <typename T>
T parse_number(const std::string & text, const std::string & section, const std::string & key)
{
  T v{};
  const char * first = text.data();
  const char * last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw invalid_config(where(section, key) + ": cannot parse \"" + text + "\"");
  }
  return v;
}

template <typename T>
std::string format_number(T v)
{
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
struct Codec;

template <>
struct Codec<int>
{
  static int parse(const std::string & s, const std::string & sec, const std::string & key)
  {
    return parse_number<int>(s, sec, key);
  }
  static std::string format(int v) { return format_number(v); }
};

template <>
struct Codec<std::uint64_t>
{
  static std::uint64_t parse(const std::string & s, const std::string & sec, const std::string & key)
  {
    return parse_number<std::uint64_t>(s, sec, key);
  }
  static std::string format(std::uint64_t v) { return format_number(v); }
};

template <>
struct Codec<double>
{
  static double parse(const std::string & s, const std::string & sec, const std::string & key)
  {
    return parse_number<double>(s, sec, key);
  }
  static std::string format(double v) { return format_number(v); }
};

template <>
struct Codec<std::optional<double>>
{
  static std::optional<double> parse(const std::string & s, const std::string & sec, const std::string & key)
  {
    if (s.empty()) {
      return std::nullopt;
    }
    return parse_number<double>(s, sec, key);
  }
  static std::string format(const std::optional<double> & v) { return v ? format_number(*v) : ""; }
};

template <>
struct Codec<std::string>
{
  static std::string parse(const std::string & s, const std::string &, const std::string &) { return s; }
  static std::string format(const std::string & v) { return v; }
};

template <>
struct Codec<Geometry>
{
  static Geometry parse(const std::string & s, const std::string & sec, const std::string & key)
  {
    try {
      return parse_geometry(s);
    } catch (const Error & e) {
      throw invalid_config(where(sec, key) + ": " + e.what());
    }
  }
  static std::string format(Geometry g) { return to_string(g); }
};

struct Field
{
  std::string section;
  std::string key;
  std::function<void(RunConfig &, const std::string &)> set;
  std::function<std::string(const RunConfig &)> get;
};

template <typename T, typename Access>
Field make_field(const std::string & section, const std::string & key, Access access)
{
  return Field{
    section, key,
    [section, key, access](RunConfig & c, const std::string & v) {
      access(c) = Codec<T>::parse(v, section, key);
    },
    [access](const RunConfig & c) { return Codec<T>::format(access(const_cast<RunConfig &>(c))); },
  };
}

#define VBMIX_FIELD(section, key, type, member) \
  make_field<type>(section, key, [](RunConfig & c) -> type & { return c.member; })

const std::vector<Field> & fields()
{
  static const std::vector<Field> table = {
    VBMIX_FIELD("generator", "seed", std::uint64_t, generator.seed),
    VBMIX_FIELD("generator", "n_scenes", int, generator.n_scenes),
    VBMIX_FIELD("generator", "history", int, generator.history),
    VBMIX_FIELD("generator", "future", int, generator.future),
    VBMIX_FIELD("generator", "step_seconds", double, generator.step_seconds),
    VBMIX_FIELD("generator", "geometry", Geometry, generator.geometry),
    VBMIX_FIELD("generator", "mode_count", int, generator.mode_count),
    VBMIX_FIELD("generator", "mode_separation", double, generator.mode_separation),
    VBMIX_FIELD("generator", "speed_min", double, generator.speed_min),
    VBMIX_FIELD("generator", "speed_max", double, generator.speed_max),
    VBMIX_FIELD("generator", "noise_std", double, generator.noise_std),
    VBMIX_FIELD("generator", "max_neighbors", int, generator.max_neighbors),
    VBMIX_FIELD("generator", "radius", double, generator.params.radius),
    VBMIX_FIELD("generator", "ramp_length", double, generator.params.ramp_length),
    VBMIX_FIELD("generator", "lane_offset", double, generator.params.lane_offset),
    VBMIX_FIELD("generator", "ood_fraction", double, generator.ood_fraction),
    VBMIX_FIELD("generator", "ood_radius", std::optional<double>, ood_radius),
    VBMIX_FIELD("generator", "ood_ramp_length", std::optional<double>, ood_ramp_length),
    VBMIX_FIELD("generator", "ood_lane_offset", std::optional<double>, ood_lane_offset),

    VBMIX_FIELD("encoder", "d_model", int, encoder.d_model),
    VBMIX_FIELD("encoder", "subgraph_depth", int, encoder.subgraph_depth),
    VBMIX_FIELD("encoder", "n_levels", int, encoder.n_levels),
    VBMIX_FIELD("encoder", "n_heads", int, encoder.n_heads),
    VBMIX_FIELD("encoder", "max_neighbors", int, encoder.max_neighbors),
    VBMIX_FIELD("encoder", "max_polylines", int, encoder.max_polylines),
    VBMIX_FIELD("encoder", "max_polyline_vectors", int, encoder.max_polyline_vectors),

    VBMIX_FIELD("mixture", "K", int, mixture.K),
    VBMIX_FIELD("mixture", "d_v", int, mixture.d_v),
    VBMIX_FIELD("mixture", "hidden", int, mixture.hidden),
    VBMIX_FIELD("mixture", "decoder_hidden_layers", int, mixture.decoder_hidden_layers),

    VBMIX_FIELD("train", "epochs", int, train.epochs),
    VBMIX_FIELD("train", "batch_size", int, train.batch_size),
    VBMIX_FIELD("train", "lr", double, train.lr),
    VBMIX_FIELD("train", "decay_step", int, train.decay_step),
    VBMIX_FIELD("train", "decay_rate", double, train.decay_rate),
    VBMIX_FIELD("train", "alpha", double, train.alpha),
    VBMIX_FIELD("train", "gamma_focal", double, train.gamma_focal),
    VBMIX_FIELD("train", "n_mc", int, train.n_mc),
    VBMIX_FIELD("train", "seed", std::uint64_t, train.seed),
    VBMIX_FIELD("train", "adam_beta1", double, train.adam_beta1),
    VBMIX_FIELD("train", "adam_beta2", double, train.adam_beta2),
    VBMIX_FIELD("train", "adam_eps", double, train.adam_eps),
    VBMIX_FIELD("train", "chunk_size", int, train.chunk_size),
    VBMIX_FIELD("train", "threads", int, train.threads),

    VBMIX_FIELD("sampling", "M", int, sampling.M),
    VBMIX_FIELD("sampling", "radius", double, sampling.radius),
    VBMIX_FIELD("sampling", "iou_threshold", double, sampling.iou_threshold),
    VBMIX_FIELD("sampling", "resolution", double, sampling.resolution),
    VBMIX_FIELD("sampling", "n_sigma", double, sampling.n_sigma),
    VBMIX_FIELD("sampling", "top_c", int, sampling.top_c),

    VBMIX_FIELD("eval", "n_mc", int, eval.n_mc),
    VBMIX_FIELD("eval", "miss_rate", std::string, eval.miss_rate),
    VBMIX_FIELD("eval", "x_min", double, eval.region.x_min),
    VBMIX_FIELD("eval", "x_max", double, eval.region.x_max),
    VBMIX_FIELD("eval", "y_min", double, eval.region.y_min),
    VBMIX_FIELD("eval", "y_max", double, eval.region.y_max),
    VBMIX_FIELD("eval", "heatmap_resolution", double, eval.heatmap_resolution),
    VBMIX_FIELD("eval", "heatmap_top_c", int, eval.heatmap_top_c),
  };
  return table;
}

#undef VBMIX_FIELD

const Field * find_field(const std::string & section, const std::string & key)
{
  for (const auto & f : fields()) {
    if (f.section == section && f.key == key) {
      return &f;
    }
  }
  return nullptr;
}

}  // namespace

GeometryParams default_ood_params(Geometry g, const GeometryParams & base)
{
  GeometryParams p = base;
  switch (g) {
    case Geometry::kArcChoice:
      p.radius = base.radius * 1.75;
      break;
    case Geometry::kFork:
      p.ramp_length = base.ramp_length * 2.0;
      break;
    case Geometry::kMerge:
      p.lane_offset = base.lane_offset * 1.5;
      break;
  }
  return p;
}

GeneratorConfig resolved_generator(const RunConfig & c)
{
  GeneratorConfig g = c.generator;
  const bool overridden = c.ood_radius || c.ood_ramp_length || c.ood_lane_offset;
  if (g.ood_fraction > 0.0 || overridden) {
    GeometryParams p = overridden ? g.params : default_ood_params(g.geometry, g.params);
    if (c.ood_radius) p.radius = *c.ood_radius;
    if (c.ood_ramp_length) p.ramp_length = *c.ood_ramp_length;
    if (c.ood_lane_offset) p.lane_offset = *c.ood_lane_offset;
    g.ood_params = p;
  }
  return g;
}

ModelConfig model_config(const RunConfig & c, const Horizons & h)
{
  ModelConfig m;
  m.encoder = c.encoder;
  m.mixture = c.mixture;
  m.mixture.d_x = c.encoder.d_model;
  m.mixture.H = h.history;
  m.mixture.T = h.future;
  m.init_seed = c.train.seed;
  return m;
}

void set_config_value(RunConfig & config, const std::string & section, const std::string & key,
                      const std::string & value)
{
  const Field * f = find_field(section, key);
  if (!f) {
    throw invalid_config("unknown config key " + where(section, key));
  }
  f->set(config, value);
}

RunConfig parse_run_config(const std::string & text, const std::string & origin)
{
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error & e) {
    throw invalid_config(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig c;
  for (const auto & [section, body] : tree) {
    if (body.empty()) {
      throw invalid_config(origin + ": key \"" + section + "\" is outside a section");
    }
    for (const auto & [key, value] : body) {
      try {
        set_config_value(c, section, key, value.get_value<std::string>());
      } catch (const Error & e) {
        throw invalid_config(origin + ": " + e.what());
      }
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.string());
}

std::string format_run_config(const RunConfig & config)
{
  std::string out;
  std::string section;
  for (const auto & f : fields()) {
    if (f.section != section) {
      out += (section.empty() ? "[" : "\n[") + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

void validate(const RunConfig & c)
{
  validate(resolved_generator(c));
  validate(c.encoder);
  validate(model_config(c, Horizons{c.generator.history, c.generator.future}));
  validate(c.train);
  validate(c.sampling);
  const EvalConfig & e = c.eval;
  if (e.n_mc < 1) throw invalid_config("[eval] n_mc must be >= 1");
  parse_miss_rate(e.miss_rate);
  if (!(e.heatmap_resolution > 0.0)) throw invalid_config("[eval] heatmap_resolution must be > 0");
  if (!(e.region.x_max >= e.region.x_min) || !(e.region.y_max >= e.region.y_min)) {
    throw invalid_config("[eval] heatmap region is empty");
  }
  if (e.heatmap_top_c < 1) throw invalid_config("[eval] heatmap_top_c must be >= 1");
}

}  // namespace vbmix
