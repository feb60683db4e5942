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

#include <stdexcept>
#include <string>

namespace latentforce {

// Error kinds map one-to-one onto the C API status codes and the CLI exit
// codes (see latentforce.h).
enum class ErrorKind {
  kIo = 2,
  kConfig = 3,
  kNumeric = 4,
  kArtifactMismatch = 5,
  kArgument = 6,
  kShape = 7,
  kUndefined = 8,
  kFrozenViolation = 9,
  kContract = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define LATENTFORCE_DEFINE_ERROR(Name, Kind)                 \
  class Name : public Error {                                \
   public:                                                   \
    explicit Name(const std::string& what) : Error(Kind, what) {} \
  };

LATENTFORCE_DEFINE_ERROR(IoError, ErrorKind::kIo)
LATENTFORCE_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
LATENTFORCE_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
LATENTFORCE_DEFINE_ERROR(ArtifactMismatchError, ErrorKind::kArtifactMismatch)
LATENTFORCE_DEFINE_ERROR(ArgumentError, ErrorKind::kArgument)
LATENTFORCE_DEFINE_ERROR(ShapeError, ErrorKind::kShape)
LATENTFORCE_DEFINE_ERROR(UndefinedError, ErrorKind::kUndefined)
LATENTFORCE_DEFINE_ERROR(FrozenViolationError, ErrorKind::kFrozenViolation)
LATENTFORCE_DEFINE_ERROR(ContractError, ErrorKind::kContract)

#undef LATENTFORCE_DEFINE_ERROR

}  // namespace latentforce
