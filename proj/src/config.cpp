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

#include "latentforce/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "latentforce/errors.hpp"

namespace latentforce {
namespace {

struct KeyDef {
  const char* key;
  Config::Type type;
  const char* value;
  const char* doc;
};

using T = Config::Type;

// clang-format off
const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
    {"sim.kind_left",        T::kString, "grid_vision", "left finger sensor kind (grid_vision|pin_vision|taxel_array)"},
    {"sim.kind_right",       T::kString, "pin_vision",  "right finger sensor kind"},
    {"sim.n_frames",         T::kInt,    "1000",  "frames per grasp episode"},
    {"sim.n_indenters",      T::kInt,    "8",     "number of indenters (one episode each)"},
    {"sim.seed",             T::kInt,    "0",     "episode seed base"},
    {"sim.profile_seed",     T::kInt,    "0",     "seed for per-sensor manufacturing jitter"},
    {"sim.noise_std",        T::kDouble, "0",     "zero-mean Gaussian noise on raw signals (gray levels / mm)"},
    {"sim.friction_cap",     T::kDouble, "0.4",   "no-slip cap: |F_t| <= friction_cap * F_z"},
    {"sim.torque_amplitude", T::kDouble, "0",     "torque random-walk amplitude in N*mm"},
    {"sim.f_min",            T::kDouble, "0.2",   "normal force of the initial gentle grasp (N)"},
    {"sim.f_peak_min",       T::kDouble, "4",     "lower bound of the sampled peak normal force (N)"},
    {"sim.f_peak_max",       T::kDouble, "12",    "upper bound of the sampled peak normal force (N)"},
    {"sim.shear_max",        T::kDouble, "3",     "tangential force clip (N)"},
    {"sim.grid_vision.shear_gain",       T::kDouble, "0.12", "mm/N"},
    {"sim.grid_vision.normal_gain",      T::kDouble, "0.08", "mm/N"},
    {"sim.grid_vision.torsion_gain",     T::kDouble, "0.002", "1/(N*mm)"},
    {"sim.grid_vision.influence_radius", T::kDouble, "5",    "mm"},
    {"sim.pin_vision.shear_gain",        T::kDouble, "0.2",  "mm/N"},
    {"sim.pin_vision.normal_gain",       T::kDouble, "0.15", "mm/N"},
    {"sim.pin_vision.torsion_gain",      T::kDouble, "0.003", "1/(N*mm)"},
    {"sim.pin_vision.influence_radius",  T::kDouble, "7",    "mm"},
    {"sim.taxel_array.shear_gain",       T::kDouble, "0.1",  "mm/N"},
    {"sim.taxel_array.normal_gain",      T::kDouble, "0.08", "mm/N"},
    {"sim.taxel_array.torsion_gain",     T::kDouble, "0.002", "1/(N*mm)"},
    {"sim.taxel_array.influence_radius", T::kDouble, "6",    "mm"},
    {"canon.taxel_k_xy",     T::kDouble, "26",    "taxel shear to pixel shift (px per signal unit)"},
    {"canon.taxel_k_z",      T::kDouble, "20",    "taxel normal signal to radius growth (px per unit)"},
    {"canon.taxel_r_min",    T::kDouble, "8",     "minimum rendered taxel radius (px)"},
    {"canon.taxel_r_max",    T::kDouble, "60",    "maximum rendered taxel radius (px)"},
    {"split.val_indenters",  T::kInt,    "1",     "indenters assigned to the validation split"},
    {"split.test_indenters", T::kInt,    "2",     "indenters held out for testing (unseen objects)"},
    {"data.stride",          T::kInt,    "1",     "use every stride-th frame of each episode"},
    {"data.max_frames",      T::kInt,    "0",     "frames per episode to load (0 = all)"},
    {"model.image_size",     T::kInt,    "224",   "square model input size (px)"},
    {"model.patch_size",     T::kInt,    "16",    "patch edge (px)"},
    {"model.embed_dim",      T::kInt,    "256",   "token width D"},
    {"model.depth",          T::kInt,    "4",     "encoder (spatial, temporal) block pairs"},
    {"model.heads",          T::kInt,    "8",     "attention heads"},
    {"model.decoder_depth",  T::kInt,    "4",     "decoder spatial blocks"},
    {"model.mlp_ratio",      T::kInt,    "2",     "MLP hidden width as a multiple of D"},
    {"model.seed",           T::kInt,    "0",     "parameter initialization seed"},
    {"train.batch_size",     T::kInt,    "8",     "pairs per step"},
    {"train.epochs",         T::kInt,    "10",    "passes over the training split"},
    {"train.max_steps",      T::kInt,    "0",     "stop after this many steps (0 = no limit)"},
    {"train.lr",             T::kDouble, "1e-4",  "peak learning rate"},
    {"train.weight_decay",   T::kDouble, "1e-4",  "decoupled weight decay on weight matrices"},
    {"train.cosine",         T::kBool,   "true",  "cosine learning-rate decay to zero"},
    {"train.grad_clip",      T::kDouble, "1",     "global gradient-norm clip (0 = off)"},
    {"train.seed",           T::kInt,    "0",     "batch order and reparameterization noise seed"},
    {"train.checkpoint_every", T::kInt,  "1",     "epochs between periodic checkpoints (0 = final only)"},
    {"train.lambda_kl",      T::kDouble, "1e-3",  "KL weight"},
    {"train.lambda_eq",      T::kDouble, "1",     "equilibrium weight"},
    {"train.lambda_lpips",   T::kDouble, "1",     "perceptual surrogate weight"},
    {"head.window",          T::kInt,    "5",     "frames per force-head window"},
    {"head.channels",        T::kInt,    "16",    "conv / ConvGRU channels"},
    {"head.hidden",          T::kInt,    "32",    "MLP hidden width"},
    {"head.steps",           T::kInt,    "1500",  "head optimizer steps"},
    {"head.batch_size",      T::kInt,    "32",    "windows per head step"},
    {"head.lr",              T::kDouble, "3e-3",  "head learning rate"},
    {"head.seed",            T::kInt,    "0",     "head init and batch seed"},
  };
  return table;
}
// clang-format on

const KeyDef* find_key(const std::string& key) {
  const auto& table = key_table();
  auto it = std::find_if(table.begin(), table.end(),
                         [&](const KeyDef& s) { return key == s.key; });
  return it == table.end() ? nullptr : &*it;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_int(const std::string& s, std::int64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

Config Config::defaults() {
  Config c;
  for (const auto& s : key_table()) c.values_[s.key] = s.value;
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

Config Config::parse(std::string_view text, const std::string& origin) {
  Config c = defaults();
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": malformed section header");
      }
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    auto key = trim(std::string_view(t).substr(0, eq));
    auto value = trim(std::string_view(t).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!section.empty()) key = section + "." + key;
    c.set(key, value);
  }
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  const KeyDef* def = find_key(key);
  if (def == nullptr) throw ConfigError("unknown config key '" + key + "'");
  bool ok = true;
  switch (def->type) {
    case Type::kInt: {
      std::int64_t v;
      ok = parse_int(value, v);
      break;
    }
    case Type::kDouble: {
      double v;
      ok = parse_double(value, v) && std::isfinite(v);
      break;
    }
    case Type::kBool: {
      bool v;
      ok = parse_bool(value, v);
      break;
    }
    case Type::kString:
      ok = !value.empty();
      break;
  }
  if (!ok) {
    throw ConfigError("bad value '" + value + "' for config key '" + key + "'");
  }
  values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

namespace {
const std::string& lookup(const std::map<std::string, std::string>& values,
                          const std::string& key) {
  auto it = values.find(key);
  if (it == values.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}
}  // namespace

std::int64_t Config::get_int(const std::string& key) const {
  std::int64_t v = 0;
  if (!parse_int(lookup(values_, key), v)) {
    throw ConfigError("config key '" + key + "' is not an integer");
  }
  return v;
}

double Config::get_double(const std::string& key) const {
  double v = 0;
  if (!parse_double(lookup(values_, key), v)) {
    throw ConfigError("config key '" + key + "' is not a number");
  }
  return v;
}

bool Config::get_bool(const std::string& key) const {
  bool v = false;
  if (!parse_bool(lookup(values_, key), v)) {
    throw ConfigError("config key '" + key + "' is not a boolean");
  }
  return v;
}

const std::string& Config::get_string(const std::string& key) const {
  return lookup(values_, key);
}

std::string Config::dump() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) {
    out << key << " = " << value;
    if (const KeyDef* def = find_key(key)) out << "  # " << def->doc;
    out << '\n';
  }
  return out.str();
}

}  // namespace latentforce
