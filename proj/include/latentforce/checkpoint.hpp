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
#include <string>
#include <vector>

#include "latentforce/model.hpp"

namespace latentforce {

constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Matrix value;
};

/// Binary container:
///
///     "LFCKPT\0\0" | u32 version | str kind | str config_json | u32 count |
///     count x (str name | i64 rows | i64 cols | rows*cols f64)
///
/// where `str` is a u32 byte length followed by the bytes. All integers and
/// doubles are little-endian; arrays are row-major.
struct Checkpoint {
  std::string kind;
  std::string config_json;
  std::vector<NamedArray> arrays;
};

std::string serialize(const Checkpoint& ckpt);
/// Throws ArtifactMismatchError on a bad magic, an unknown version or a
/// truncated body.
Checkpoint deserialize(const std::string& bytes);

/// Writes through a temporary file and a rename.
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

Checkpoint model_checkpoint(const Model& model);
/// Rebuilds a model; kind, names and shapes must match its config exactly.
Model model_from_checkpoint(const Checkpoint& ckpt);

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace latentforce
