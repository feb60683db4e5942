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

// latentforce command-line driver. Everything goes through the C API.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latentforce/latentforce.h"

namespace {

struct ConfigHandle {
  lf_config* ptr = nullptr;
  ~ConfigHandle() { lf_config_free(ptr); }
};

int fail(lf_status st) {
  std::fprintf(stderr, "error (%s): %s\n", lf_status_name(st), lf_last_error());
  return lf_exit_code(st);
}

lf_status build_config(const std::string& path, const std::vector<std::string>& overrides,
                       std::optional<long long> seed, ConfigHandle& out) {
  lf_status st = path.empty() ? lf_config_defaults(&out.ptr) : lf_config_load(path.c_str(), &out.ptr);
  if (st != LF_OK) return st;
  if (seed) {
    const std::string s = std::to_string(*seed);
    for (const char* key : {"sim.seed", "model.seed", "train.seed", "head.seed"}) {
      if ((st = lf_config_set(out.ptr, key, s.c_str())) != LF_OK) return st;
    }
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error (config): --set expects key=value, got '%s'\n", kv.c_str());
      return LF_ERR_CONFIG;
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if ((st = lf_config_set(out.ptr, key.c_str(), value.c_str())) != LF_OK) return st;
  }
  return LF_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latentforce: sensor-agnostic latent force maps for tactile sensing"};
  app.set_version_flag("--version", std::string(lf_version()));

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<long long> seed;
  bool print_config = false;
  app.add_option("--config", config_path, "flat dotted-key config file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override one config key (key=value), repeatable");
  app.add_option("--seed", seed, "set sim, model, train and head seeds");
  app.add_flag("--print-config", print_config, "print the effective config and exit");

  auto* simgen = app.add_subcommand("simgen", "generate a paired synthetic dataset");
  std::string sim_out;
  simgen->add_option("--out", sim_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the encoder/decoder without force labels");
  std::string train_data, train_out;
  std::optional<double> lambda_eq;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output checkpoint path")->required();
  train->add_option("--lambda-eq", lambda_eq, "equilibrium loss weight");

  auto* recon = app.add_subcommand("reconstruct", "export the 2x4 reconstruction grid");
  std::string recon_ckpt, recon_data, recon_episode, recon_out;
  int recon_frame = 0;
  recon->add_option("--checkpoint", recon_ckpt, "model checkpoint")->required();
  recon->add_option("--data", recon_data, "dataset directory")->required();
  recon->add_option("--episode", recon_episode, "episode id (default: first test episode)");
  recon->add_option("--frame", recon_frame, "frame index")->check(CLI::NonNegativeNumber);
  recon->add_option("--out", recon_out, "output PNG")->required();

  auto* analyze = app.add_subcommand("analyze", "latent vs force correlation heat map");
  std::string an_ckpt, an_data, an_split = "test", an_out;
  analyze->add_option("--checkpoint", an_ckpt, "model checkpoint")->required();
  analyze->add_option("--data", an_data, "dataset directory")->required();
  analyze->add_option("--split", an_split, "all|train|val|test");
  analyze->add_option("--out", an_out, "output prefix (.csv and .json are appended)")->required();

  auto* evalzs = app.add_subcommand("evalzs", "zero-shot force transfer between sensors");
  std::string ev_ckpt, ev_head, ev_source = "L", ev_target = "R", ev_src_dir, ev_tgt_dir, ev_out;
  evalzs->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  evalzs->add_option("--head", ev_head, "force head (trained and saved here when missing)");
  evalzs->add_option("--source", ev_source, "source side (L|R) or sensor id");
  evalzs->add_option("--target", ev_target, "target side (L|R) or sensor id");
  evalzs->add_option("--source-data", ev_src_dir, "source dataset directory")->required();
  evalzs->add_option("--target-data", ev_tgt_dir, "target dataset directory (default: source)");
  evalzs->add_option("--out", ev_out, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  ConfigHandle cfg;
  lf_status st = build_config(config_path, overrides, seed, cfg);
  if (st == LF_OK && lambda_eq) {
    st = lf_config_set(cfg.ptr, "train.lambda_eq", std::to_string(*lambda_eq).c_str());
  }
  if (st != LF_OK) return fail(st);

  if (print_config) {
    char* text = nullptr;
    if ((st = lf_config_dump(cfg.ptr, &text)) != LF_OK) return fail(st);
    std::fputs(text, stdout);
    lf_string_free(text);
    return 0;
  }

  if (*simgen) {
    st = lf_simgen(cfg.ptr, sim_out.c_str());
  } else if (*train) {
    st = lf_train(train_data.c_str(), cfg.ptr, train_out.c_str());
  } else if (*recon) {
    st = lf_reconstruct(recon_ckpt.c_str(), recon_data.c_str(), recon_episode.c_str(), recon_frame,
                        recon_out.c_str());
  } else if (*analyze) {
    st = lf_analyze(an_ckpt.c_str(), an_data.c_str(), an_split.c_str(), cfg.ptr, an_out.c_str());
  } else if (*evalzs) {
    st = lf_evalzs(ev_ckpt.c_str(), ev_head.c_str(), ev_source.c_str(), ev_target.c_str(),
                   ev_src_dir.c_str(), ev_tgt_dir.empty() ? nullptr : ev_tgt_dir.c_str(), cfg.ptr,
                   ev_out.c_str());
  } else {
    std::fputs(app.help().c_str(), stdout);
    return 3;
  }
  return st == LF_OK ? 0 : fail(st);
}
