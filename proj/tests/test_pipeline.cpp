// Copyright 2026 The latentforce Authors
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


#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "latentforce/checkpoint.hpp"
#include "latentforce/errors.hpp"
#include "latentforce/pipeline.hpp"
#include "support/test_support.hpp"

using namespace latentforce;

namespace {

Config tiny_run() {
  Config c = Config::defaults();
  for (auto [k, v] : {std::pair{"sim.n_frames", "16"}, {"sim.n_indenters", "4"},
                      {"split.val_indenters", "1"}, {"split.test_indenters", "1"},
                      {"model.image_size", "112"}, {"model.embed_dim", "32"}, {"model.depth", "1"},
                      {"model.heads", "4"}, {"model.decoder_depth", "1"}, {"train.batch_size", "4"},
                      {"train.epochs", "2"}, {"train.max_steps", "3"}, {"head.steps", "20"},
                      {"head.channels", "4"}, {"head.hidden", "8"}, {"head.batch_size", "8"}}) {
    c.set(k, v);
  }
  return c;
}

struct Fixture {
  lftest::TempDir dir{"pipe"};
  Config cfg = tiny_run();
  std::ostringstream log;
  Fixture() { cmd_simgen(cfg, dir.str("data"), log); }
};

}  // namespace

TEST_CASE("train writes checkpoints, a loss log, and releases the lock") {
  Fixture f;
  const std::string ckpt = f.dir.str("run/model.ckpt");
  const TrainSummary s = cmd_train(f.dir.str("data"), f.cfg, ckpt, f.log);
  CHECK(s.steps == 3);
  CHECK(s.has_val);
  CHECK(std::filesystem::exists(ckpt));
  CHECK(std::filesystem::exists(ckpt + ".epoch0"));
  CHECK_FALSE(std::filesystem::exists(ckpt + ".lock"));

  std::ifstream csv(ckpt + ".loss.csv");
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);

  const Model m = load_model(ckpt);
  CHECK(m.config().image_size == 112);

  // Same seeds, same bytes.
  const std::string again = f.dir.str("run/again.ckpt");
  cmd_train(f.dir.str("data"), f.cfg, again, f.log);
  CHECK(load_model(again).checksum() == m.checksum());
}

TEST_CASE("a held lock stops a second run") {
  Fixture f;
  const std::string ckpt = f.dir.str("m.ckpt");
  { std::ofstream(ckpt + ".lock") << "1\n"; }
  CHECK_THROWS_AS(cmd_train(f.dir.str("data"), f.cfg, ckpt, f.log), IoError);
  CHECK_FALSE(std::filesystem::exists(ckpt));
}

TEST_CASE("reconstruct, analyze and evalzs produce their artifacts") {
  Fixture f;
  const std::string ckpt = f.dir.str("m.ckpt");
  cmd_train(f.dir.str("data"), f.cfg, ckpt, f.log);

  cmd_reconstruct(ckpt, f.dir.str("data"), "", 2, f.dir.str("grid.png"));
  CHECK(std::filesystem::file_size(f.dir.str("grid.png")) > 0);
  CHECK_THROWS_AS(cmd_reconstruct(ckpt, f.dir.str("data"), "", 99, f.dir.str("x.png")), ArgumentError);

  const Model m = load_model(ckpt);
  std::mt19937_64 rng(5);
  const Image8 grid = reconstruction_grid(m, lftest::random_observation(112, rng),
                                          lftest::random_observation(112, rng));
  CHECK(grid.width == 4 * 112);
  CHECK(grid.height == 2 * 112);

  const CorrelationAnalysis a = cmd_analyze(ckpt, f.dir.str("data"), "test", f.cfg, f.dir.str("an"), f.log);
  CHECK(a.pooled_n == 2 * 16);
  CHECK(std::filesystem::exists(f.dir.str("an.csv")));
  const auto j = nlohmann::json::parse(std::ifstream(f.dir.str("an.json")));
  CHECK(j["sensors"].size() == 2);

  EvalRequest req;
  req.checkpoint = ckpt;
  req.head = f.dir.str("head.bin");
  req.source_dir = f.dir.str("data");
  req.out_json = f.dir.str("ev.json");
  const EvalReport first = cmd_evalzs(req, f.cfg, f.log);
  CHECK(std::filesystem::exists(req.head));
  CHECK(first.n == 16 - 4);
  const EvalReport second = cmd_evalzs(req, f.cfg, f.log);
  CHECK(second.r2 == first.r2);
  const auto ev = nlohmann::json::parse(std::ifstream(req.out_json));
  CHECK(ev["source"] == "grid_vision");
  CHECK(ev["target"] == "pin_vision");

  req.source = "Q";
  CHECK_THROWS_AS(cmd_evalzs(req, f.cfg, f.log), ArgumentError);
}

TEST_CASE("a checkpoint from a different model config is rejected by evalzs") {
  Fixture f;
  const std::string ckpt = f.dir.str("m.ckpt");
  cmd_train(f.dir.str("data"), f.cfg, ckpt, f.log);
  EvalRequest req;
  req.checkpoint = ckpt;
  req.head = f.dir.str("head.bin");
  req.source_dir = f.dir.str("data");
  cmd_evalzs(req, f.cfg, f.log);

  Config other = f.cfg;
  other.set("model.patch_size", "8");
  const std::string ckpt2 = f.dir.str("m2.ckpt");
  cmd_train(f.dir.str("data"), other, ckpt2, f.log);
  req.checkpoint = ckpt2;
  CHECK_THROWS_AS(cmd_evalzs(req, other, f.log), ArtifactMismatchError);
}
