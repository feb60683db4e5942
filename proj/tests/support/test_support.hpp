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

// Shared fixtures for the unit and acceptance suites.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "latentforce/autograd.hpp"
#include "latentforce/canonicalize.hpp"
#include "latentforce/model.hpp"
#include "latentforce/objectives.hpp"

namespace lftest {

using latentforce::Matrix;

inline latentforce::MarkerImage random_binary(int size, std::mt19937_64& rng, double density = 0.2) {
  std::bernoulli_distribution on(density);
  latentforce::MarkerImage img;
  img.image = latentforce::Image8(size, size);
  for (auto& p : img.image.pixels) p = on(rng) ? 255 : 0;
  return img;
}

inline latentforce::TactileObservation random_observation(int size, std::mt19937_64& rng) {
  latentforce::TactileObservation obs;
  obs.ref = random_binary(size, rng);
  obs.cur = random_binary(size, rng);
  return obs;
}

inline latentforce::PairSample random_pair(int size, std::mt19937_64& rng, int frame = 0) {
  latentforce::PairSample s;
  s.episode_id = "random";
  s.frame = frame;
  s.left = random_observation(size, rng);
  s.right = random_observation(size, rng);
  s.right.mirrored = true;
  return s;
}

inline latentforce::ModelConfig tiny_model(int embed_dim = 32, std::uint64_t seed = 0) {
  latentforce::ModelConfig c;
  c.image_size = 112;
  c.patch_size = 16;
  c.embed_dim = embed_dim;
  c.depth = 1;
  c.heads = 4;
  c.decoder_depth = 1;
  c.mlp_ratio = 2;
  c.seed = seed;
  return c;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

struct GradEntry {
  latentforce::ag::Parameter* param = nullptr;
  Eigen::Index index = 0;
};

struct GradCheck {
  double max_rel_error = 0;
  double max_abs_error = 0;
  int checked = 0;
};

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares reverse-mode gradients of `loss` against central differences on
/// the chosen entries. `loss` must build a fresh graph on every call and be a
/// deterministic function of the parameter values.
inline GradCheck check_gradients(
    const std::vector<latentforce::ag::Parameter*>& params, const std::vector<GradEntry>& entries,
    const std::function<latentforce::ag::Var(latentforce::ag::Graph&)>& loss, double h,
    double floor) {
  namespace ag = latentforce::ag;
  for (ag::Parameter* p : params) p->zero_grad();
  {
    ag::Graph g;
    g.train(params);
    g.backward(loss(g));
  }
  auto eval = [&] {
    ag::Graph g(false);
    return g.scalar(loss(g));
  };
  GradCheck out;
  for (const GradEntry& e : entries) {
    double& x = e.param->value.data()[e.index];
    const double x0 = x;
    x = x0 + h;
    const double fp = eval();
    x = x0 - h;
    const double fm = eval();
    x = x0;
    const double numeric = (fp - fm) / (2 * h);
    const double analytic = e.param->grad.data()[e.index];
    out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic, numeric, floor));
    out.max_abs_error = std::max(out.max_abs_error, std::abs(analytic - numeric));
    ++out.checked;
  }
  return out;
}

/// `count` distinct (parameter, entry) positions drawn uniformly over all
/// scalar parameters.
inline std::vector<GradEntry> random_entries(const std::vector<latentforce::ag::Parameter*>& params,
                                             int count, std::mt19937_64& rng) {
  std::vector<GradEntry> all;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) all.push_back({p, i});
  }
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min<std::size_t>(all.size(), static_cast<std::size_t>(count)));
  return all;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("latentforce_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = {}) const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace lftest
