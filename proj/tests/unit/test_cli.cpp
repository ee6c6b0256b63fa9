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
#include "vbmix/cli.hpp"
#include "vbmix/config.hpp"
#include "vbmix/scene_io.hpp"

#include "helpers.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

using namespace vbmix;
namespace fs = std::filesystem;

namespace
{

struct Result
{
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string> & args)
{
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string & s, const std::string & what) { return s.find(what) != std::string::npos; }

// Small horizons and a narrow model keep every command fast.
std::vector<std::string> small_data(const fs::path & dir, const std::string & n = "40")
{
  return {"make-data", "--out", dir.string(), "--n", n, "--ood-frac", "0.25",
          "--history", "4", "--future", "12", "--seed", "5"};
}

std::vector<std::string> small_train(const fs::path & data, const fs::path & ckpt)
{
  return {"train", "--data", data.string(), "--out", ckpt.string(), "--epochs", "1",
          "--batch", "8", "--d-model", "8", "--k", "2", "--n-mc", "1"};
}

struct Fixture
{
  fs::path dir;
  fs::path id;
  fs::path ood;
  fs::path ckpt;
};

const Fixture & trained()
{
  static const Fixture f = [] {
    Fixture x;
    x.dir = test::scratch_dir("cli_trained");
    REQUIRE(run(small_data(x.dir)).code == cli::kExitOk);
    x.id = x.dir / "id.scenes.jsonl";
    x.ood = x.dir / "ood.scenes.jsonl";
    x.ckpt = x.dir / "model.ckpt";
    REQUIRE(run(small_train(x.id, x.ckpt)).code == cli::kExitOk);
    return x;
  }();
  return f;
}

}  // namespace

TEST_CASE("make-data splits scenes between ID and OOD files")
{
  const fs::path dir = test::scratch_dir("cli_split");
  const Result r = run({"make-data", "--out", dir.string(), "--n", "100", "--ood-frac", "0.35",
                        "--history", "4", "--future", "12"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(contains(r.out, "wrote 65 ID scenes"));
  CHECK(contains(r.out, "wrote 35 OOD scenes"));
  const SceneFile id = load_scene_file(dir / "id.scenes.jsonl");
  const SceneFile ood = load_scene_file(dir / "ood.scenes.jsonl");
  CHECK(id.scenes.size() == 65);
  CHECK(ood.scenes.size() == 35);
  for (const auto & s : ood.scenes) {
    CHECK(s.meta.ood);
  }
  CHECK(fs::exists(dir / "run.config.ini"));
  CHECK(load_run_config(dir / "run.config.ini").generator.n_scenes == 100);
}

TEST_CASE("make-data is byte-identical across runs")
{
  const fs::path a = test::scratch_dir("cli_same_a");
  const fs::path b = test::scratch_dir("cli_same_b");
  REQUIRE(run(small_data(a)).code == cli::kExitOk);
  REQUIRE(run(small_data(b)).code == cli::kExitOk);
  for (const char * f : {"id.scenes.jsonl", "ood.scenes.jsonl", "run.config.ini"}) {
    CHECK(test::slurp(a / f) == test::slurp(b / f));
  }
}

TEST_CASE("missing required flags exit with the config code and name the flag")
{
  const Result r = run({"make-data", "--n", "10"});
  CHECK(r.code == cli::kExitConfig);
  CHECK(contains(r.err, "--out"));
  CHECK(run({}).code == cli::kExitConfig);
  CHECK(run({"no-such-command"}).code == cli::kExitConfig);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("bad flag values and missing files map to their exit codes")
{
  const fs::path dir = test::scratch_dir("cli_codes");
  Result r = run({"make-data", "--out", dir.string(), "--n", "ten"});
  CHECK(r.code == cli::kExitConfig);
  CHECK(contains(r.err, "--n"));

  r = run({"make-data", "--out", dir.string(), "--geometry", "spiral"});
  CHECK(r.code == cli::kExitConfig);

  r = run({"evaluate", "--scenes", (dir / "absent.jsonl").string(), "--baseline", "cv"});
  CHECK(r.code == cli::kExitIo);

  test::write_file(dir / "broken.jsonl", "{not json\n");
  r = run({"evaluate", "--scenes", (dir / "broken.jsonl").string(), "--baseline", "cv"});
  CHECK(r.code == cli::kExitConfig);

  r = run({"predict", "--checkpoint", (dir / "absent.ckpt").string(), "--scenes",
           (dir / "absent.jsonl").string(), "--out", (dir / "p.jsonl").string()});
  CHECK(r.code == cli::kExitIo);
}

TEST_CASE("the seed variable sits between the config file and flags")
{
  const fs::path a = test::scratch_dir("cli_env_a");
  const fs::path b = test::scratch_dir("cli_env_b");
  const fs::path c = test::scratch_dir("cli_env_c");
  const fs::path ini = a / "seed.ini";
  test::write_file(ini, "[generator]\nseed = 1\n");

  ::setenv("SENEVA_SEED", "77", 1);
  std::vector<std::string> env_args = {"make-data", "--out", a.string(), "--n", "10",
                                       "--history", "4", "--future", "12", "--config", ini.string()};
  const Result with_env = run(env_args);
  std::vector<std::string> flag_args = env_args;
  flag_args[2] = b.string();
  flag_args.insert(flag_args.end(), {"--seed", "3"});
  const Result with_flag = run(flag_args);
  ::setenv("SENEVA_SEED", "x7", 1);
  std::vector<std::string> bad_args = env_args;
  bad_args[2] = c.string();
  const Result bad = run(bad_args);
  ::unsetenv("SENEVA_SEED");

  REQUIRE(with_env.code == cli::kExitOk);
  REQUIRE(with_flag.code == cli::kExitOk);
  CHECK(load_run_config(a / "run.config.ini").generator.seed == 77);
  CHECK(load_run_config(b / "run.config.ini").generator.seed == 3);
  CHECK(bad.code == cli::kExitConfig);
  CHECK(contains(bad.err, "SENEVA_SEED"));

  const Result plain = run({"make-data", "--out", c.string(), "--n", "10", "--history", "4",
                            "--future", "12", "--config", ini.string()});
  REQUIRE(plain.code == cli::kExitOk);
  CHECK(load_run_config(c / "run.config.ini").generator.seed == 1);
}

TEST_CASE("train with zero epochs echoes defaults and writes an untrained checkpoint")
{
  const fs::path dir = test::scratch_dir("cli_epochs0");
  REQUIRE(run(small_data(dir, "20")).code == cli::kExitOk);
  const fs::path ckpt = dir / "zero.ckpt";
  const Result r = run({"train", "--data", (dir / "id.scenes.jsonl").string(), "--out", ckpt.string(),
                        "--epochs", "0", "--d-model", "8"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(contains(r.out, "vbmix train: lr 0.0001, batch 64, decay 0.3 every 5 epochs"));
  CHECK_FALSE(contains(r.out, "epoch 1/"));
  const Checkpoint c = load_checkpoint(ckpt);
  REQUIRE(c.state.has_value());
  CHECK(c.state->epoch == 0);
  CHECK(c.model.config().mixture.H == 4);
  CHECK(c.model.config().mixture.T == 12);
  CHECK(fs::exists(ckpt.string() + ".config.ini"));
  CHECK(test::slurp(ckpt.string() + ".metrics.jsonl").empty());
}

TEST_CASE("training logs one metrics line per epoch and resumes")
{
  const Fixture & f = trained();
  const std::string metrics = test::slurp(f.ckpt.string() + ".metrics.jsonl");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1);
  CHECK(nlohmann::json::parse(metrics.substr(0, metrics.find('\n'))).contains("epoch"));

  const fs::path copy = f.dir / "resume.ckpt";
  fs::copy_file(f.ckpt, copy, fs::copy_options::overwrite_existing);
  std::vector<std::string> args = small_train(f.id, copy);
  args[6] = "2";
  args.insert(args.end(), {"--resume", copy.string()});
  const Result r = run(args);
  REQUIRE(r.code == cli::kExitOk);
  CHECK(contains(r.out, "resuming after epoch 1"));
  CHECK(contains(r.out, "epoch 2/2"));
  CHECK_FALSE(contains(r.out, "epoch 1/2"));
  CHECK(load_checkpoint(copy).state->epoch == 2);
}

TEST_CASE("evaluating the ground truth as a prediction gives zero error")
{
  const Fixture & f = trained();
  const SceneFile id = load_scene_file(f.id);
  std::string text;
  for (const auto & s : id.scenes) {
    nlohmann::json path = nlohmann::json::array();
    for (const auto & p : *s.future) {
      path.push_back({p.x(), p.y()});
    }
    text += nlohmann::json{{"scene_id", s.scene_id}, {"trajectories", {path}}}.dump() + "\n";
  }
  const fs::path preds = f.dir / "truth.jsonl";
  test::write_file(preds, text);
  for (const char * mr : {"interaction", "argoverse"}) {
    const Result r = run({"evaluate", "--scenes", f.id.string(), "--predictions", preds.string(), "--mr", mr});
    REQUIRE(r.code == cli::kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["min_ade"].get<double>() == 0.0);
    CHECK(j["min_fde"].get<double>() == 0.0);
    CHECK(j["miss_rate"].get<double>() == 0.0);
    CHECK(j["miss_rate_definition"] == mr);
    CHECK(j["n_scenes"] == static_cast<int>(id.scenes.size()));
  }

  const Result cv = run({"evaluate", "--scenes", f.id.string(), "--baseline", "cv",
                         "--out", (f.dir / "cv.json").string()});
  REQUIRE(cv.code == cli::kExitOk);
  CHECK(test::slurp(f.dir / "cv.json") == cv.out);
  CHECK(nlohmann::json::parse(cv.out)["min_fde"].get<double>() > 0.0);

  CHECK(run({"evaluate", "--scenes", f.id.string(), "--baseline", "lstm"}).code == cli::kExitConfig);
  CHECK(run({"evaluate", "--scenes", f.id.string()}).code == cli::kExitConfig);
  test::write_file(f.dir / "partial.jsonl", text.substr(0, text.find('\n') + 1));
  const Result missing = run({"evaluate", "--scenes", f.id.string(), "--predictions",
                              (f.dir / "partial.jsonl").string()});
  CHECK(missing.code == cli::kExitConfig);
  CHECK(contains(missing.err, "no predictions for scene"));
}

TEST_CASE("predict writes M trajectories per scene in world coordinates")
{
  const Fixture & f = trained();
  const fs::path out = f.dir / "pred.jsonl";
  const Result r = run({"predict", "--checkpoint", f.ckpt.string(), "--scenes", f.id.string(),
                        "--out", out.string(), "--m", "6"});
  REQUIRE(r.code == cli::kExitOk);
  const SceneFile id = load_scene_file(f.id);
  std::istringstream lines(test::slurp(out));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    const Scene & s = id.scenes[n++];
    CHECK(j["scene_id"] == s.scene_id);
    const auto & t = j["trajectories"];
    CHECK(t.size() <= 6);
    CHECK(t.size() == j["scores"].size());
    CHECK(t.size() == j["components"].size());
    CHECK(j["exhausted"].get<bool>() == (t.size() < 6));
    for (const auto & path : t) {
      REQUIRE(path.size() == 12);
      const MotionState & last = s.target.states.back();
      const double dx = path[0][0].get<double>() - last.x;
      const double dy = path[0][1].get<double>() - last.y;
      CHECK(std::hypot(dx, dy) < 50.0);
    }
  }
  CHECK(n == id.scenes.size());

  const fs::path again = f.dir / "pred2.jsonl";
  REQUIRE(run({"predict", "--checkpoint", f.ckpt.string(), "--scenes", f.id.string(),
               "--out", again.string(), "--m", "6"}).code == cli::kExitOk);
  CHECK(test::slurp(out) == test::slurp(again));
}

TEST_CASE("horizon mismatches are rejected naming both horizons")
{
  const Fixture & f = trained();
  const fs::path dir = test::scratch_dir("cli_horizon");
  REQUIRE(run({"make-data", "--out", dir.string(), "--n", "5", "--history", "6", "--future", "12"}).code ==
          cli::kExitOk);
  const Result r = run({"predict", "--checkpoint", f.ckpt.string(), "--scenes",
                        (dir / "id.scenes.jsonl").string(), "--out", (dir / "p.jsonl").string()});
  CHECK(r.code == cli::kExitConfig);
  CHECK(contains(r.err, "scene horizons (H=6, T=12)"));
  CHECK(contains(r.err, "model horizons (H=4, T=12)"));
  CHECK_FALSE(fs::exists(dir / "p.jsonl"));
}

TEST_CASE("uq-report covers both splits and notes a missing OOD split")
{
  const Fixture & f = trained();
  Result r = run({"uq-report", "--checkpoint", f.ckpt.string(), "--scenes", f.id.string(), f.ood.string(),
                  "--n-mc", "4", "--out", (f.dir / "uq.json").string()});
  REQUIRE(r.code == cli::kExitOk);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["groups"].size() == 2);
  CHECK(j["changes"].size() == 1);
  CHECK(j["notices"].empty());
  CHECK(test::slurp(f.dir / "uq.json") == r.out);

  r = run({"uq-report", "--checkpoint", f.ckpt.string(), "--scenes", f.id.string(), "--n-mc", "4"});
  REQUIRE(r.code == cli::kExitOk);
  j = nlohmann::json::parse(r.out);
  CHECK(j["changes"].empty());
  REQUIRE(j["notices"].size() == 1);
  CHECK(contains(j["notices"][0].get<std::string>(), "no OOD scenes"));
}

TEST_CASE("heatmap writes a grid and an optional image")
{
  const Fixture & f = trained();
  const SceneFile id = load_scene_file(f.id);
  const std::string scene = id.scenes[2].scene_id;
  const fs::path grid = f.dir / "heat.txt";
  const fs::path ppm = f.dir / "heat.ppm";
  const Result r = run({"heatmap", "--checkpoint", f.ckpt.string(), "--scenes", f.id.string(),
                        "--scene-id", scene, "--out", grid.string(), "--ppm", ppm.string(),
                        "--x-min", "-10", "--x-max", "10", "--y-min", "-5", "--y-max", "5",
                        "--resolution", "0.5"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(contains(r.out, "41x21 heatmap for " + scene));
  CHECK(test::slurp(grid).rfind("# scene " + scene, 0) == 0);
  CHECK(test::slurp(ppm).rfind("P6", 0) == 0);

  const Result missing = run({"heatmap", "--checkpoint", f.ckpt.string(), "--scenes", f.id.string(),
                              "--scene-id", "nope", "--out", grid.string()});
  CHECK(missing.code == cli::kExitConfig);
  CHECK(contains(missing.err, "scene nope not found"));
}
