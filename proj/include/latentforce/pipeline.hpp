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

#pragma once

#include <ostream>
#include <string>

#include "latentforce/config.hpp"
#include "latentforce/dataset.hpp"
#include "latentforce/model.hpp"
#include "latentforce/objectives.hpp"
#include "latentforce/transfer_eval.hpp"

namespace latentforce {

/// Command implementations behind the CLI. All of them report failures by
/// throwing latentforce::Error subclasses; the C API maps those onto exit
/// codes.

DatasetManifest cmd_simgen(const Config& config, const std::string& out_dir, std::ostream& log);

struct TrainSummary {
  int steps = 0;
  LossBreakdown initial_val;
  LossBreakdown final_val;
  bool has_val = false;
};

/// Trains on the dataset's train split. Writes `out_checkpoint`, periodic
/// `<out>.epoch<N>` checkpoints and `<out>.loss.csv`, and holds
/// `<out>.lock` for the duration of the run.
TrainSummary cmd_train(const std::string& dataset_dir, const Config& config,
                       const std::string& out_checkpoint, std::ostream& log);

/// 2 x 4 panel grid. Row 0 is the left sensor, row 1 the right; columns are
/// the contact frame, the self reconstruction, the cross reconstruction and
/// |cross - contact|.
Image8 reconstruction_grid(const Model& model, const TactileObservation& left,
                           const TactileObservation& right);

/// Renders the grid for one stored pair. An empty episode picks the first
/// test episode.
void cmd_reconstruct(const std::string& checkpoint, const std::string& dataset_dir,
                     const std::string& episode, int frame, const std::string& out_png);

/// Writes `<out_prefix>.csv` (mean r and SD across sensors) and
/// `<out_prefix>.json` (pooled and per-sensor matrices with counts).
CorrelationAnalysis cmd_analyze(const std::string& checkpoint, const std::string& dataset_dir,
                                const std::string& split, const Config& config,
                                const std::string& out_prefix, std::ostream& log);

struct EvalRequest {
  std::string checkpoint;
  std::string head;  // loaded when present, otherwise trained and saved here
  std::string source = "L";  // side letter or sensor id
  std::string target = "R";
  std::string source_dir;
  std::string target_dir;  // defaults to source_dir
  std::string out_json;
};

/// Head training uses the source train split; evaluation uses the target
/// test split, whose indenters never appear in training.
EvalReport cmd_evalzs(const EvalRequest& request, const Config& config, std::ostream& log);

/// Resolves "L", "R" or a profile sensor id to a side letter.
char resolve_side(const DatasetManifest& manifest, const std::string& id);

LoadOptions load_options(const Config& config, int image_size);

}  // namespace latentforce
