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


#include <string>

#include "doctest.h"
#include "latentforce/config.hpp"
#include "latentforce/errors.hpp"
#include "support/test_support.hpp"

using namespace latentforce;

TEST_CASE("defaults cover the documented keys") {
  const Config c = Config::defaults();
  CHECK(c.get_int("sim.n_frames") == 1000);
  CHECK(c.get_int("model.image_size") == 224);
  CHECK(c.get_int("model.patch_size") == 16);
  CHECK(c.get_double("train.lr") == 1e-4);
  CHECK(c.get_double("train.lambda_kl") == 1e-3);
  CHECK(c.get_double("train.lambda_eq") == 1.0);
  CHECK(c.get_int("train.batch_size") == 8);
  CHECK(c.get_int("head.window") == 5);
}

TEST_CASE("sections and dotted keys are equivalent") {
  const Config a = Config::parse("[sim]\nn_frames = 37\n# comment\n[train]\nlr = 0.5\n");
  const Config b = Config::parse("sim.n_frames = 37\ntrain.lr = 0.5\n");
  CHECK(a.values() == b.values());
  CHECK(a.get_int("sim.n_frames") == 37);
}

TEST_CASE("dump parses back to the same values") {
  Config c = Config::defaults();
  c.set("sim.kind_left", "taxel_array");
  c.set("train.lambda_eq", "0.25");
  CHECK(Config::parse(c.dump()).values() == c.values());
}

TEST_CASE("unknown keys and bad values name the key") {
  try {
    Config::parse("sim.n_framez = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sim.n_framez") != std::string::npos);
  }
  Config c = Config::defaults();
  CHECK_THROWS_AS(c.set("sim.n_frames", "many"), ConfigError);
  CHECK_THROWS_AS(c.set("train.lr", "1e-3x"), ConfigError);
  CHECK_THROWS_AS(c.set("bogus", "1"), ConfigError);
  CHECK_THROWS_AS(c.get_int("bogus"), ConfigError);
}

TEST_CASE("load reports missing files as IO errors") {
  lftest::TempDir dir("cfg");
  CHECK_THROWS_AS(Config::load(dir.str("none.toml")), IoError);
}
