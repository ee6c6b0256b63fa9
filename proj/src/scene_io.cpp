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

#include "vbmix/scene_io.hpp"

#include "vbmix/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace vbmix
{

namespace
{

using Json = nlohmann::ordered_json;

Json track_to_json(const AgentTrack & t)
{
  Json states = Json::array();
  for (const auto & s : t.states) {
    states.push_back({s.x, s.y, s.heading, s.vx, s.vy});
  }
  return Json{{"agent_id", t.agent_id}, {"n_states", t.states.size()}, {"states", states}};
}

Json scene_to_json(const Scene & s)
{
  Json neighbors = Json::array();
  for (const auto & n : s.neighbors) {
    neighbors.push_back(track_to_json(n));
  }
  Json map = Json::array();
  for (const auto & pl : s.map) {
    Json vecs = Json::array();
    for (const auto & v : pl.vectors) {
      vecs.push_back({v.head.x(), v.head.y(), v.tail.x(), v.tail.y()});
    }
    map.push_back(Json{{"n_vectors", pl.vectors.size()}, {"vectors", vecs}});
  }
  Json future = nullptr;
  if (s.future) {
    Json pts = Json::array();
    for (const auto & p : *s.future) {
      pts.push_back({p.x(), p.y()});
    }
    future = Json{{"n_points", s.future->size()}, {"points", pts}};
  }
  return Json{
    {"scene_id", s.scene_id},
    {"meta", Json{{"geometry", s.meta.geometry}, {"ood", s.meta.ood}}},
    {"target", track_to_json(s.target)},
    {"n_neighbors", s.neighbors.size()},
    {"neighbors", neighbors},
    {"n_polylines", s.map.size()},
    {"map", map},
    {"future", future},
  };
}

// Field access with descriptive failures; `where` is the record locus.
const Json & field(const Json & j, const char * key, const std::string & where)
{
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorKind::kParse, where + ": missing field \"" + key + "\"");
  }
  return j.at(key);
}

std::size_t count_field(const Json & j, const char * key, const std::string & where)
{
  const Json & v = field(j, key, where);
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw Error(ErrorKind::kParse, where + ": field \"" + key + "\" must be an integer");
  }
  return v.get<std::size_t>();
}

const Json & list_field(
  const Json & j, const char * key, std::size_t expected, const std::string & where,
  const std::string & name)
{
  const Json & v = field(j, key, where);
  if (!v.is_array()) {
    throw Error(ErrorKind::kParse, where + ": field \"" + key + "\" must be a list");
  }
  if (v.size() != expected) {
    throw invalid_input(
      where + ": " + name + " has " + std::to_string(v.size()) + " entries, declared " +
      std::to_string(expected));
  }
  return v;
}

std::vector<double> numbers(const Json & j, std::size_t n, const std::string & where)
{
  if (!j.is_array() || j.size() != n) {
    throw Error(
      ErrorKind::kParse, where + ": expected a list of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  out.reserve(n);
  for (const auto & x : j) {
    if (!x.is_number()) {
      throw Error(ErrorKind::kParse, where + ": expected a number");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

AgentTrack track_from_json(const Json & j, const std::string & where)
{
  AgentTrack t;
  const Json & id = field(j, "agent_id", where);
  t.agent_id = id.is_string() ? id.get<std::string>() : id.dump();
  const std::size_t n = count_field(j, "n_states", where);
  const Json & states = list_field(j, "states", n, where, "states");
  for (const auto & s : states) {
    const auto v = numbers(s, 5, where);
    t.states.push_back(MotionState{v[0], v[1], v[2], v[3], v[4]});
  }
  return t;
}

Scene scene_from_json(const Json & j, const std::string & where)
{
  Scene s;
  const Json & id = field(j, "scene_id", where);
  s.scene_id = id.is_string() ? id.get<std::string>() : id.dump();
  const Json & meta = field(j, "meta", where);
  s.meta.geometry = field(meta, "geometry", where).get<std::string>();
  s.meta.ood = field(meta, "ood", where).get<bool>();
  s.target = track_from_json(field(j, "target", where), where + " target");
  const std::size_t nn = count_field(j, "n_neighbors", where);
  const Json & neighbors = list_field(j, "neighbors", nn, where, "neighbors");
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    s.neighbors.push_back(
      track_from_json(neighbors[i], where + " neighbors[" + std::to_string(i) + "]"));
  }
  const std::size_t np = count_field(j, "n_polylines", where);
  const Json & map = list_field(j, "map", np, where, "map");
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::string w = where + " map[" + std::to_string(i) + "]";
    const std::size_t nv = count_field(map[i], "n_vectors", w);
    const Json & vecs = list_field(map[i], "vectors", nv, w, "vectors");
    MapPolyline pl;
    for (const auto & v : vecs) {
      const auto x = numbers(v, 4, w);
      pl.vectors.push_back(MapVector{Point(x[0], x[1]), Point(x[2], x[3])});
    }
    s.map.push_back(std::move(pl));
  }
  const Json & future = field(j, "future", where);
  if (!future.is_null()) {
    const std::size_t nf = count_field(future, "n_points", where + " future");
    const Json & pts = list_field(future, "points", nf, where, "future");
    Path f;
    for (const auto & p : pts) {
      const auto x = numbers(p, 2, where + " future");
      f.emplace_back(x[0], x[1]);
    }
    s.future = std::move(f);
  }
  return s;
}

}  // namespace

SceneFile parse_scene_file(const std::string & text, const std::string & origin)
{
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  SceneFile file;
  bool have_header = false;
  std::size_t declared = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const std::string where = origin + ":" + std::to_string(line_no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error & e) {
      throw Error(ErrorKind::kParse, where + ": " + e.what());
    }
    try {
      if (!have_header) {
        const Json & fmt = field(j, "format", where);
        if (fmt != kSceneFormat) {
          throw Error(ErrorKind::kParse, where + ": not a scene file (format " + fmt.dump() + ")");
        }
        if (field(j, "version", where) != kSceneFormatVersion) {
          throw Error(ErrorKind::kParse, where + ": unsupported scene file version");
        }
        file.header.history = field(j, "H", where).get<int>();
        file.header.future = field(j, "T", where).get<int>();
        file.header.step_seconds = field(j, "step_seconds", where).get<double>();
        declared = count_field(j, "count", where);
        if (file.header.history < 1 || file.header.future < 1 ||
            !(file.header.step_seconds > 0.0)) {
          throw invalid_input(where + ": header requires H >= 1, T >= 1, step_seconds > 0");
        }
        have_header = true;
        continue;
      }
      Scene s = scene_from_json(j, where);
      try {
        validate_scene(s, file.header.horizons());
      } catch (const Error & e) {
        throw invalid_input(where + ": " + e.what());
      }
      file.scenes.push_back(std::move(s));
    } catch (const nlohmann::json::exception & e) {
      throw Error(ErrorKind::kParse, where + ": " + e.what());
    }
  }
  if (!have_header) {
    throw Error(ErrorKind::kParse, origin + ": missing header record");
  }
  if (file.scenes.size() != declared) {
    throw invalid_input(
      origin + ": header declares " + std::to_string(declared) + " scenes, found " +
      std::to_string(file.scenes.size()));
  }
  return file;
}

SceneFile load_scene_file(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open scene file " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene_file(buf.str(), path.string());
}

std::string format_scene_file(const SceneFile & file)
{
  std::string out;
  Json header{
    {"format", kSceneFormat},
    {"version", kSceneFormatVersion},
    {"H", file.header.history},
    {"T", file.header.future},
    {"step_seconds", file.header.step_seconds},
    {"count", file.scenes.size()},
  };
  out += header.dump();
  out += '\n';
  for (const auto & s : file.scenes) {
    out += scene_to_json(s).dump();
    out += '\n';
  }
  return out;
}

void save_scene_file(const std::filesystem::path & path, const SceneFile & file)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot write scene file " + path.string());
  }
  out << format_scene_file(file);
  if (!out) {
    throw Error(ErrorKind::kIo, "write failed for " + path.string());
  }
}

}  // namespace vbmix
