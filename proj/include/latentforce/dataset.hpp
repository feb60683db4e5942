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

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "latentforce/sample.hpp"
#include "latentforce/sensor_sim.hpp"
#include "latentforce/transfer_eval.hpp"

namespace latentforce {

class Config;

constexpr int kDatasetFormatVersion = 1;

struct ProfileEntry {
  std::string side;  // "L" or "R"
  std::string sensor_id;
  std::string kind;
  std::uint64_t seed = 0;
};

struct EpisodeEntry {
  std::string id;
  std::string indenter_id;
  int n_frames = 0;
  std::uint64_t seed = 0;
  std::string split;  // train | val | test
};

/// On-disk layout:
///
///     manifest.json
///     reference_L.png, reference_R.png
///     pairs/<episode>/frame_<k>_L.png, frame_<k>_R.png   (canonical, R mirrored)
///     pairs/<episode>/meta.jsonl                          (labels)
///     pairs/<episode>/taxels_<side>.jsonl                 (taxel kinds only)
struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::string config;  // generator config in file syntax
  std::vector<ProfileEntry> profiles;
  std::vector<EpisodeEntry> episodes;
  std::map<std::string, std::string> files;  // relative path -> SHA-256 hex

  std::vector<const EpisodeEntry*> split(const std::string& name) const;
  std::vector<std::string> split_indenters(const std::string& name) const;
  const ProfileEntry& profile(const std::string& side) const;

  std::string to_json() const;
  /// Rejects unknown format versions with ArtifactMismatchError.
  static DatasetManifest from_json(const std::string& text);
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

std::string frame_path(const std::string& episode_id, int k, char side);

/// Simulates every episode, canonicalizes both fingers and writes the
/// dataset. `progress` receives one line per finished episode.
DatasetManifest generate_dataset(const Config& config, const std::string& out_dir,
                                 const std::function<void(const std::string&)>& progress = {});

DatasetManifest read_manifest(const std::string& dir);
/// Recomputes every checksum; ArtifactMismatchError names the first mismatch.
void verify_dataset(const std::string& dir, const DatasetManifest& manifest);

struct LoadOptions {
  int image_size = 224;
  int stride = 1;          // keep every stride-th frame
  int max_frames = 0;      // per episode, 0 = all
};

/// Label-free pair loader used by training. It reads PNGs only; meta.jsonl is
/// never opened on this path.
std::vector<PairSample> load_pairs(const std::string& dir, const DatasetManifest& manifest,
                                   const std::string& split, const LoadOptions& options);

/// Ground-truth wrenches of a dataset. Every successful lookup is counted so
/// audits can prove a code path never touched labels.
class LabelTable {
 public:
  static LabelTable load(const std::string& dir, const DatasetManifest& manifest);

  const Wrench& wrench(const std::string& episode_id, int k) const;
  std::size_t size() const;

  /// Process-wide count of wrench lookups.
  static std::int64_t reads();
  /// Process-wide count of label files opened.
  static std::int64_t loads();

 private:
  std::map<std::string, std::vector<Wrench>> rows_;
};

/// One sensor's frames of every episode in `split`, with (F_x, F_y, F_z).
std::vector<LabeledSequence> load_sequences(const std::string& dir,
                                            const DatasetManifest& manifest,
                                            const std::string& split, char side,
                                            const LoadOptions& options, const LabelTable& labels);

}  // namespace latentforce
