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
#include <map>
#include <string>
#include <string_view>

namespace latentforce {

/// Flat dotted-key configuration.
///
/// Files use one `key = value` assignment per line. `#` starts a comment and
/// `[section]` headers prefix the keys that follow them, so
///
///     [sim]
///     n_frames = 500
///
/// is equivalent to `sim.n_frames = 500`. Every key must be one of the known
/// keys listed by `Config::defaults().dump()`; unknown keys and unparsable
/// values raise ConfigError naming the offending key.
class Config {
 public:
  enum class Type { kInt, kDouble, kBool, kString };

  static Config defaults();
  static Config load(const std::string& path);
  static Config parse(std::string_view text, const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;

  /// All keys with their current values, sorted, in the file syntax.
  std::string dump() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace latentforce
