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

#include "vbmix/cli.hpp"

#include "vbmix/checkpoint.hpp"
#include "vbmix/config.hpp"
#include "vbmix/evaluation.hpp"
#include "vbmix/sampling.hpp"
#include "vbmix/scene_io.hpp"
#include "vbmix/synthetic.hpp"
#include "vbmix/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

namespace vbmix::cli
{

namespace
{

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char * kSeedEnv = "SENEVA_SEED";

void write_text(const fs::path & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot write " + path.string());
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw Error(ErrorKind::kIo, "write failed for " + path.string());
  }
}

std::string read_text(const fs::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// A subcommand whose flags write straight into RunConfig keys.
class Command
{
public:
  Command(CLI::App & app, const std::string & name, const std::string & description)
  : app_(app.add_subcommand(name, description))
  {
    app_->add_option("--config", config_path_, "INI file with run settings")->check(CLI::ExistingFile);
    flag("--threads", "train", "threads", "worker threads (1 gives reference results)");
  }

  CLI::App * app() const { return app_; }

  void flag(const std::string & name, const std::string & section, const std::string & key,
            const std::string & description)
  {
    auto value = std::make_unique<std::string>();
    CLI::Option * opt = app_->add_option(name, *value, description);
    flags_.push_back(Flag{opt, section, key, std::move(value)});
  }

  RunConfig resolve() const
  {
    RunConfig c = config_path_.empty() ? RunConfig{} : load_run_config(config_path_);
    if (const char * env = std::getenv(kSeedEnv); env && *env) {
      std::uint64_t seed = 0;
      const char * end = env + std::char_traits<char>::length(env);
      const auto [ptr, ec] = std::from_chars(env, end, seed);
      if (ec != std::errc() || ptr != end) {
        throw invalid_config(std::string(kSeedEnv) + ": cannot parse \"" + env + "\"");
      }
      c.generator.seed = seed;
      c.train.seed = seed;
    }
    for (const auto & f : flags_) {
      if (f.option->count() > 0) {
        try {
          set_config_value(c, f.section, f.key, *f.value);
        } catch (const Error & e) {
          throw invalid_config(f.option->get_name() + ": " + e.what());
        }
      }
    }
    validate(c);
    return c;
  }

private:
  struct Flag
  {
    CLI::Option * option;
    std::string section;
    std::string key;
    std::unique_ptr<std::string> value;
  };

  CLI::App * app_;
  std::string config_path_;
  std::vector<Flag> flags_;
};

struct SceneSet
{
  SceneFileHeader header;
  std::vector<Scene> scenes;
};

SceneSet load_scenes(const std::vector<std::string> & paths)
{
  SceneSet set;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    SceneFile f = load_scene_file(paths[i]);
    if (i == 0) {
      set.header = f.header;
    } else if (f.header.history != set.header.history || f.header.future != set.header.future ||
               f.header.step_seconds != set.header.step_seconds) {
      throw invalid_input(paths[i] + ": header differs from " + paths[0]);
    }
    for (auto & s : f.scenes) {
      set.scenes.push_back(std::move(s));
    }
  }
  return set;
}

void check_horizons(const SceneFileHeader & header, const ModelConfig & model)
{
  if (header.history != model.mixture.H || header.future != model.mixture.T) {
    throw invalid_config(
      "scene horizons (H=" + std::to_string(header.history) + ", T=" + std::to_string(header.future) +
      ") do not match the model horizons (H=" + std::to_string(model.mixture.H) +
      ", T=" + std::to_string(model.mixture.T) + ")");
  }
}

std::vector<PreparedScene> prepare_all(const std::vector<Scene> & scenes, const ModelConfig & config)
{
  std::vector<PreparedScene> out;
  out.reserve(scenes.size());
  for (const auto & s : scenes) {
    out.push_back(prepare_scene(s, config));
  }
  return out;
}

Json path_json(const Path & p)
{
  Json a = Json::array();
  for (const auto & q : p) {
    a.push_back({q.x(), q.y()});
  }
  return a;
}

std::map<std::string, std::vector<Path>> read_predictions(const fs::path & path)
{
  std::map<std::string, std::vector<Path>> out;
  std::istringstream in(read_text(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      const Json j = Json::parse(line);
      std::vector<Path> trajectories;
      for (const auto & t : j.at("trajectories")) {
        Path p;
        for (const auto & q : t) {
          p.emplace_back(q.at(0).get<double>(), q.at(1).get<double>());
        }
        trajectories.push_back(std::move(p));
      }
      out[j.at("scene_id").get<std::string>()] = std::move(trajectories);
    } catch (const nlohmann::json::exception & e) {
      throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

int make_data(const Command & cmd, const std::string & out_dir, std::ostream & out)
{
  const RunConfig c = cmd.resolve();
  const GeneratorConfig g = resolved_generator(c);
  const SceneFile id = to_scene_file(g, generate_dataset(g));
  const SceneFile ood =
    to_scene_file(g, ood_scene_count(g) > 0 ? generate_ood_split(g) : std::vector<Scene>{});
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorKind::kIo, "cannot create " + out_dir + ": " + ec.message());
  }
  const fs::path dir(out_dir);
  save_scene_file(dir / "id.scenes.jsonl", id);
  save_scene_file(dir / "ood.scenes.jsonl", ood);
  write_text(dir / "run.config.ini", format_run_config(c));
  out << "wrote " << id.scenes.size() << " ID scenes to " << (dir / "id.scenes.jsonl").string() << "\n";
  out << "wrote " << ood.scenes.size() << " OOD scenes to " << (dir / "ood.scenes.jsonl").string() << "\n";
  return kExitOk;
}

int train_cmd(
  const Command & cmd, const std::vector<std::string> & data, const std::string & out_path,
  std::string metrics_path, const std::string & resume, std::ostream & out)
{
  const RunConfig c = cmd.resolve();
  const SceneSet set = load_scenes(data);
  std::optional<Model> model;
  TrainState state;
  if (!resume.empty()) {
    Checkpoint ck = load_checkpoint(resume);
    if (!ck.state) {
      throw invalid_input(resume + " carries no training state to resume from");
    }
    check_horizons(set.header, ck.model.config());
    model.emplace(std::move(ck.model));
    state = std::move(*ck.state);
  } else {
    model.emplace(Model::create(model_config(c, set.header.horizons())));
  }
  const std::vector<PreparedScene> prepared = prepare_all(set.scenes, model->config());
  for (const auto & p : prepared) {
    if (!p.displacements) {
      throw invalid_input("scene " + p.scene_id + " has no future to train on");
    }
  }
  const TrainConfig & tc = c.train;
  out << "vbmix train: lr " << tc.lr << ", batch " << tc.batch_size << ", decay " << tc.decay_rate
      << " every " << tc.decay_step << " epochs, epochs " << tc.epochs << ", K " << model->mixture().K
      << ", scenes " << prepared.size() << ", threads " << tc.threads << "\n";
  if (!resume.empty()) {
    out << "resuming after epoch " << state.epoch << "\n";
  }
  if (metrics_path.empty()) {
    metrics_path = out_path + ".metrics.jsonl";
  }
  std::ofstream metrics(metrics_path, resume.empty() ? std::ios::trunc : std::ios::app);
  if (!metrics) {
    throw Error(ErrorKind::kIo, "cannot write " + metrics_path);
  }
  write_text(out_path + ".config.ini", format_run_config(c));
  train(*model, prepared, tc, state, &metrics,
        [&](const EpochMetrics & m, const Model & trained, const TrainState & s) {
          out << "epoch " << m.epoch << "/" << tc.epochs << " lr " << m.lr << " total " << m.loss.total
              << " elbo " << m.loss.elbo << " focal " << m.loss.focal << "\n";
          save_checkpoint(out_path, trained, &s);
        });
  save_checkpoint(out_path, *model, &state);
  out << "checkpoint " << out_path << "\n";
  return kExitOk;
}

int predict_cmd(
  const Command & cmd, const std::string & checkpoint, const std::vector<std::string> & scenes,
  const std::string & out_path, std::ostream & out)
{
  const RunConfig c = cmd.resolve();
  const Checkpoint ck = load_checkpoint(checkpoint);
  const SceneSet set = load_scenes(scenes);
  check_horizons(set.header, ck.model.config());
  std::string text;
  int exhausted = 0;
  for (const auto & s : set.scenes) {
    const PredictionSet p = predict_top_m(ck.model, prepare_scene(s, ck.model.config()), c.sampling);
    Json j;
    j["scene_id"] = p.scene_id;
    j["trajectories"] = Json::array();
    for (const auto & t : p.trajectories) {
      j["trajectories"].push_back(path_json(t));
    }
    j["scores"] = p.scores;
    j["components"] = p.component_of;
    j["exhausted"] = p.exhausted;
    text += j.dump() + "\n";
    exhausted += p.exhausted ? 1 : 0;
  }
  write_text(out_path, text);
  write_text(out_path + ".config.ini", format_run_config(c));
  out << "wrote predictions for " << set.scenes.size() << " scenes to " << out_path << "\n";
  if (exhausted > 0) {
    out << exhausted << " scenes had fewer than " << c.sampling.M << " candidates\n";
  }
  return kExitOk;
}

int evaluate_cmd(
  const Command & cmd, const std::vector<std::string> & scenes, const std::string & predictions,
  const std::string & baseline, const std::string & out_path, std::ostream & out)
{
  const RunConfig c = cmd.resolve();
  const MissRateKind kind = parse_miss_rate(c.eval.miss_rate);
  const SceneSet set = load_scenes(scenes);
  std::vector<std::vector<Path>> preds;
  if (!baseline.empty()) {
    if (baseline != "cv") {
      throw invalid_config("unknown baseline \"" + baseline + "\" (cv)");
    }
    for (const auto & s : set.scenes) {
      preds.push_back({constant_velocity(s, set.header.future, set.header.step_seconds)});
    }
  } else {
    if (predictions.empty()) {
      throw invalid_config("one of --predictions or --baseline is required");
    }
    auto by_id = read_predictions(predictions);
    for (const auto & s : set.scenes) {
      auto it = by_id.find(s.scene_id);
      if (it == by_id.end()) {
        throw invalid_input("no predictions for scene " + s.scene_id);
      }
      preds.push_back(std::move(it->second));
    }
  }
  const std::string text =
    format_metrics_report(evaluate_predictions(preds, set.scenes, set.header.step_seconds, kind), kind);
  out << text;
  if (!out_path.empty()) {
    write_text(out_path, text);
    write_text(out_path + ".config.ini", format_run_config(c));
  }
  return kExitOk;
}

int uq_report_cmd(
  const Command & cmd, const std::string & checkpoint, const std::vector<std::string> & scenes,
  const std::string & out_path, std::ostream & out)
{
  const RunConfig c = cmd.resolve();
  const Checkpoint ck = load_checkpoint(checkpoint);
  const SceneSet set = load_scenes(scenes);
  check_horizons(set.header, ck.model.config());
  const OodReport r = ood_report(ck.model, prepare_all(set.scenes, ck.model.config()), c.eval.n_mc, c.train.seed);
  const std::string text = format_ood_report(r);
  out << text;
  if (!out_path.empty()) {
    write_text(out_path, text);
    write_text(out_path + ".config.ini", format_run_config(c));
  }
  return kExitOk;
}

int heatmap_cmd(
  const Command & cmd, const std::string & checkpoint, const std::vector<std::string> & scenes,
  const std::string & scene_id, const std::string & out_path, const std::string & ppm_path,
  std::ostream & out)
{
  const RunConfig c = cmd.resolve();
  const Checkpoint ck = load_checkpoint(checkpoint);
  const SceneSet set = load_scenes(scenes);
  check_horizons(set.header, ck.model.config());
  const Scene * chosen = nullptr;
  for (const auto & s : set.scenes) {
    if (scene_id.empty() || s.scene_id == scene_id) {
      chosen = &s;
      break;
    }
  }
  if (!chosen) {
    throw invalid_input(scene_id.empty() ? "no scenes in input" : "scene " + scene_id + " not found");
  }
  const Eigen::VectorXd x = encode_scene(ck.model, prepare_scene(*chosen, ck.model.config()));
  const int top_c = std::min(c.eval.heatmap_top_c, ck.model.mixture().K);
  const Heatmap h = heatmap(endpoint_distribution(ck.model, x, top_c), c.eval.region, c.eval.heatmap_resolution);
  write_text(out_path, "# scene " + chosen->scene_id + " (target frame)\n" + format_heatmap(h));
  if (!ppm_path.empty()) {
    write_text(ppm_path, render_heatmap_ppm(h));
  }
  write_text(out_path + ".config.ini", format_run_config(c));
  out << "wrote " << h.nx << "x" << h.ny << " heatmap for " << chosen->scene_id << " to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int exit_code(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kInvalidInput:
    case ErrorKind::kInvalidConfig:
    case ErrorKind::kParse:
      return kExitConfig;
    case ErrorKind::kNumerical:
    case ErrorKind::kInternal:
      return kExitNumerical;
  }
  return kExitIo;
}

int run(const std::vector<std::string> & args, std::ostream & out, std::ostream & err)
{
  CLI::App app{"vbmix: variational mixture trajectory prediction"};
  app.require_subcommand(1);

  Command make(app, "make-data", "generate synthetic ID and OOD scene files");
  std::string data_dir;
  make.app()->add_option("--out", data_dir, "output directory")->required();
  make.flag("--seed", "generator", "seed", "generator seed");
  make.flag("--n", "generator", "n_scenes", "total scenes (ID + OOD)");
  make.flag("--geometry", "generator", "geometry", "fork, arc_choice or merge");
  make.flag("--modes", "generator", "mode_count", "number of behavior modes");
  make.flag("--ood-frac", "generator", "ood_fraction", "share of scenes in the OOD split");
  make.flag("--ood-radius", "generator", "ood_radius", "arc radius of the OOD split");
  make.flag("--ood-ramp-length", "generator", "ood_ramp_length", "ramp length of the OOD split");
  make.flag("--ood-lane-offset", "generator", "ood_lane_offset", "lane offset of the OOD split");
  make.flag("--history", "generator", "history", "observed steps H");
  make.flag("--future", "generator", "future", "predicted steps T");

  Command trainer(app, "train", "fit a model to a scene file");
  std::vector<std::string> train_data;
  std::string checkpoint_out, metrics_out, resume;
  trainer.app()->add_option("--data", train_data, "scene files")->required();
  trainer.app()->add_option("--out", checkpoint_out, "checkpoint path")->required();
  trainer.app()->add_option("--metrics", metrics_out, "metrics log (default <out>.metrics.jsonl)");
  trainer.app()->add_option("--resume", resume, "checkpoint with training state");
  trainer.flag("--epochs", "train", "epochs", "training epochs");
  trainer.flag("--batch", "train", "batch_size", "scenes per batch");
  trainer.flag("--lr", "train", "lr", "initial learning rate");
  trainer.flag("--decay-step", "train", "decay_step", "epochs between decays");
  trainer.flag("--decay-rate", "train", "decay_rate", "learning-rate decay factor");
  trainer.flag("--alpha", "train", "alpha", "weight of the assignment loss");
  trainer.flag("--gamma", "train", "gamma_focal", "focal-loss focusing parameter");
  trainer.flag("--n-mc", "train", "n_mc", "posterior samples per scene");
  trainer.flag("--seed", "train", "seed", "initialization and noise seed");
  trainer.flag("--k", "mixture", "K", "mixture components");
  trainer.flag("--d-v", "mixture", "d_v", "latent width");
  trainer.flag("--d-model", "encoder", "d_model", "context width");

  Command predictor(app, "predict", "sample representative trajectories");
  std::string predict_ckpt, predict_out;
  std::vector<std::string> predict_scenes;
  predictor.app()->add_option("--checkpoint", predict_ckpt, "model checkpoint")->required();
  predictor.app()->add_option("--scenes", predict_scenes, "scene files")->required();
  predictor.app()->add_option("--out", predict_out, "predictions file")->required();
  predictor.flag("--m", "sampling", "M", "trajectories per scene");
  predictor.flag("--radius", "sampling", "radius", "suppression circle radius");
  predictor.flag("--iou", "sampling", "iou_threshold", "suppression IoU threshold");
  predictor.flag("--resolution", "sampling", "resolution", "candidate grid spacing");
  predictor.flag("--n-sigma", "sampling", "n_sigma", "grid extent in standard deviations");
  predictor.flag("--top-c", "sampling", "top_c", "components in the endpoint mixture");

  Command evaluator(app, "evaluate", "displacement metrics against ground truth");
  std::vector<std::string> eval_scenes;
  std::string eval_predictions, eval_baseline, eval_out;
  evaluator.app()->add_option("--scenes", eval_scenes, "scene files with futures")->required();
  evaluator.app()->add_option("--predictions", eval_predictions, "predictions file");
  evaluator.app()->add_option("--baseline", eval_baseline, "built-in baseline instead of predictions (cv)");
  evaluator.app()->add_option("--out", eval_out, "report path");
  evaluator.flag("--mr", "eval", "miss_rate", "interaction or argoverse");

  Command uq(app, "uq-report", "predictive entropy by geometry and split");
  std::string uq_ckpt, uq_out;
  std::vector<std::string> uq_scenes;
  uq.app()->add_option("--checkpoint", uq_ckpt, "model checkpoint")->required();
  uq.app()->add_option("--scenes", uq_scenes, "scene files")->required();
  uq.app()->add_option("--out", uq_out, "report path");
  uq.flag("--n-mc", "eval", "n_mc", "prior paths per component");
  uq.flag("--seed", "train", "seed", "sampling seed");

  Command heat(app, "heatmap", "log-density grid for one scene");
  std::string heat_ckpt, heat_scene, heat_out, heat_ppm;
  std::vector<std::string> heat_scenes;
  heat.app()->add_option("--checkpoint", heat_ckpt, "model checkpoint")->required();
  heat.app()->add_option("--scenes", heat_scenes, "scene files")->required();
  heat.app()->add_option("--scene-id", heat_scene, "scene to render (default: first)");
  heat.app()->add_option("--out", heat_out, "grid text path")->required();
  heat.app()->add_option("--ppm", heat_ppm, "optional raster image path");
  heat.flag("--x-min", "eval", "x_min", "region bound (target frame, m)");
  heat.flag("--x-max", "eval", "x_max", "region bound (target frame, m)");
  heat.flag("--y-min", "eval", "y_min", "region bound (target frame, m)");
  heat.flag("--y-max", "eval", "y_max", "region bound (target frame, m)");
  heat.flag("--resolution", "eval", "heatmap_resolution", "cell size (m)");
  heat.flag("--top-c", "eval", "heatmap_top_c", "components in the endpoint mixture");

  std::vector<const char *> argv{"vbmix"};
  for (const auto & a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError & e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (make.app()->parsed()) {
      return make_data(make, data_dir, out);
    }
    if (trainer.app()->parsed()) {
      return train_cmd(trainer, train_data, checkpoint_out, metrics_out, resume, out);
    }
    if (predictor.app()->parsed()) {
      return predict_cmd(predictor, predict_ckpt, predict_scenes, predict_out, out);
    }
    if (evaluator.app()->parsed()) {
      return evaluate_cmd(evaluator, eval_scenes, eval_predictions, eval_baseline, eval_out, out);
    }
    if (uq.app()->parsed()) {
      return uq_report_cmd(uq, uq_ckpt, uq_scenes, uq_out, out);
    }
    if (heat.app()->parsed()) {
      return heatmap_cmd(heat, heat_ckpt, heat_scenes, heat_scene, heat_out, heat_ppm, out);
    }
  } catch (const Error & e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error & e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace vbmix::cli
