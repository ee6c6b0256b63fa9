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

#include "vbmix/checkpoint.hpp"

#include "vbmix/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vbmix
{

namespace
{

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'V', 'B', 'M', 'I', 'X', 'C', 'K', 'P'};

using Json = nlohmann::ordered_json;

template <typename T>
void put(std::string & out, T v)
{
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_values(std::string & out, const ad::Matrix & m)
{
  out.append(reinterpret_cast<const char *>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
}

class Reader
{
public:
  explicit Reader(const std::string & bytes) : bytes_(bytes) {}

  template <typename T>
  T get()
  {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }

  std::string get_string(std::size_t n) { return std::string(take(n), n); }

  void get_values(ad::Matrix & m)
  {
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
    std::memcpy(m.data(), take(n), n);
  }

  bool done() const { return pos_ == bytes_.size(); }

private:
  const char * take(std::size_t n)
  {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::kParse, "checkpoint truncated at byte " + std::to_string(pos_));
    }
    const char * p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string & bytes_;
  std::size_t pos_ = 0;
};

Json encoder_json(const EncoderConfig & c)
{
  return Json{
    {"d_model", c.d_model},
    {"subgraph_depth", c.subgraph_depth},
    {"n_levels", c.n_levels},
    {"n_heads", c.n_heads},
    {"max_neighbors", c.max_neighbors},
    {"max_polylines", c.max_polylines},
    {"max_polyline_vectors", c.max_polyline_vectors},
  };
}

Json mixture_json(const MixtureConfig & c)
{
  return Json{
    {"K", c.K},           {"d_v", c.d_v},       {"d_x", c.d_x},
    {"T", c.T},           {"H", c.H},           {"hidden", c.hidden},
    {"decoder_hidden_layers", c.decoder_hidden_layers},
  };
}

Json config_json(const ModelConfig & c)
{
  return Json{
    {"encoder", encoder_json(c.encoder)},
    {"mixture", mixture_json(c.mixture)},
    {"init_seed", c.init_seed},
  };
}

ModelConfig config_from(const Json & j)
{
  ModelConfig c;
  const Json & e = j.at("encoder");
  c.encoder.d_model = e.at("d_model").get<int>();
  c.encoder.subgraph_depth = e.at("subgraph_depth").get<int>();
  c.encoder.n_levels = e.at("n_levels").get<int>();
  c.encoder.n_heads = e.at("n_heads").get<int>();
  c.encoder.max_neighbors = e.at("max_neighbors").get<int>();
  c.encoder.max_polylines = e.at("max_polylines").get<int>();
  c.encoder.max_polyline_vectors = e.at("max_polyline_vectors").get<int>();
  const Json & m = j.at("mixture");
  c.mixture.K = m.at("K").get<int>();
  c.mixture.d_v = m.at("d_v").get<int>();
  c.mixture.d_x = m.at("d_x").get<int>();
  c.mixture.T = m.at("T").get<int>();
  c.mixture.H = m.at("H").get<int>();
  c.mixture.hidden = m.at("hidden").get<int>();
  c.mixture.decoder_hidden_layers = m.at("decoder_hidden_layers").get<int>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string model_config_json(const ModelConfig & config) { return config_json(config).dump(); }

ModelConfig model_config_from_json(const std::string & text)
{
  try {
    return config_from(Json::parse(text));
  } catch (const nlohmann::json::exception & e) {
    throw Error(ErrorKind::kParse, std::string("model config: ") + e.what());
  }
}

std::string encode_checkpoint(const Model & model, const TrainState * state)
{
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  Json header = config_json(model.config());
  header["n_params"] = model.store.size();
  header["has_state"] = state != nullptr;
  const std::string text = header.dump();
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto & p : model.store.all()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    put_values(out, p.value);
  }
  if (state) {
    if (state->adam_m.size() != model.store.size() || state->adam_v.size() != model.store.size()) {
      throw Error(ErrorKind::kInternal, "optimizer state does not match the model");
    }
    put<std::int64_t>(out, state->epoch);
    put<std::int64_t>(out, state->step);
    for (const auto & m : state->adam_m) {
      put_values(out, m);
    }
    for (const auto & v : state->adam_v) {
      put_values(out, v);
    }
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string & bytes)
{
  Reader r(bytes);
  if (r.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw Error(ErrorKind::kParse, "not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(
      ErrorKind::kParse, "checkpoint version " + std::to_string(version) + " unsupported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = r.get<std::uint64_t>();
  Json header;
  ModelConfig config;
  std::size_t n_params = 0;
  bool has_state = false;
  try {
    header = Json::parse(r.get_string(header_len));
    config = config_from(header);
    n_params = header.at("n_params").get<std::size_t>();
    has_state = header.at("has_state").get<bool>();
  } catch (const nlohmann::json::exception & e) {
    throw Error(ErrorKind::kParse, std::string("checkpoint header: ") + e.what());
  }
  Checkpoint ck{Model::create(config), std::nullopt};
  if (n_params != ck.model.store.size()) {
    throw Error(
      ErrorKind::kParse, "checkpoint has " + std::to_string(n_params) + " tensors, model expects " +
                           std::to_string(ck.model.store.size()));
  }
  for (std::size_t i = 0; i < n_params; ++i) {
    const std::string name = r.get_string(r.get<std::uint32_t>());
    const auto rows = static_cast<Eigen::Index>(r.get<std::uint64_t>());
    const auto cols = static_cast<Eigen::Index>(r.get<std::uint64_t>());
    if (!ck.model.store.contains(name)) {
      throw Error(ErrorKind::kParse, "checkpoint tensor " + name + " unknown to the model");
    }
    ad::Matrix & value = ck.model.store[ck.model.store.index_of(name)].value;
    if (value.rows() != rows || value.cols() != cols) {
      throw Error(ErrorKind::kParse, "checkpoint tensor " + name + " has the wrong shape");
    }
    r.get_values(value);
  }
  if (has_state) {
    TrainState s;
    s.epoch = static_cast<int>(r.get<std::int64_t>());
    s.step = static_cast<long>(r.get<std::int64_t>());
    s.adam_m = ck.model.store.zeros_like();
    s.adam_v = ck.model.store.zeros_like();
    for (auto & m : s.adam_m) {
      r.get_values(m);
    }
    for (auto & v : s.adam_v) {
      r.get_values(v);
    }
    ck.state = std::move(s);
  }
  if (!r.done()) {
    throw Error(ErrorKind::kParse, "checkpoint has trailing bytes");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path & path, const Model & model, const TrainState * state)
{
  const std::string bytes = encode_checkpoint(model, state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorKind::kIo, "write failed for " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace vbmix
