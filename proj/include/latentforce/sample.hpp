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

#include <string>

#include "latentforce/canonicalize.hpp"

namespace latentforce {

/// One synchronized grasp frame seen by both fingers, canonical and at model
/// size. It carries no wrench: labels live in a separate table that the
/// training path never loads.
struct PairSample {
  std::string episode_id;
  int frame = 0;
  TactileObservation left;
  TactileObservation right;
};

}  // namespace latentforce
