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

#include "latentforce/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "latentforce/errors.hpp"

namespace latentforce {

namespace {

void check_lengths(std::size_t a, std::size_t b, std::size_t min, const char* what) {
  if (a != b) {
    throw ArgumentError(std::string(what) + ": sequences differ in length (" + std::to_string(a) +
                        " vs " + std::to_string(b) + ")");
  }
  if (a < min) throw ArgumentError(std::string(what) + ": needs at least " + std::to_string(min) + " values");
}

double mean_of(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  check_lengths(xs.size(), ys.size(), 2, "pearson");
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw UndefinedError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double r2(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true.size(), y_pred.size(), 2, "r2");
  const double m = mean_of(y_true);
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - m) * (y_true[i] - m);
  }
  if (ss_tot == 0) throw UndefinedError("r2: constant ground truth");
  return 1.0 - ss_res / ss_tot;
}

double mae(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true.size(), y_pred.size(), 1, "mae");
  double s = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_pred[i]);
  return s / static_cast<double>(y_true.size());
}

PearsonMatrix pearson_matrix(std::span<const LatentSample> samples) {
  PearsonMatrix r;
  std::vector<double> xs(samples.size()), ys(samples.size());
  for (int d = 0; d < 6; ++d) {
    for (int a = 0; a < kForceAxes; ++a) {
      for (std::size_t i = 0; i < samples.size(); ++i) {
        xs[i] = samples[i].z[d];
        ys[i] = samples[i].force[a];
      }
      try {
        r[d][a] = pearson(xs, ys);
      } catch (const UndefinedError&) {
        r[d][a] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return r;
}

void matrix_mean_sd(std::span<const PearsonMatrix> ms, PearsonMatrix& mean, PearsonMatrix& sd) {
  for (int d = 0; d < 6; ++d) {
    for (int a = 0; a < kForceAxes; ++a) {
      double s = 0;
      int n = 0;
      for (const PearsonMatrix& m : ms) {
        if (std::isnan(m[d][a])) continue;
        s += m[d][a];
        ++n;
      }
      if (n == 0) {
        mean[d][a] = sd[d][a] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      mean[d][a] = s / n;
      double ss = 0;
      for (const PearsonMatrix& m : ms) {
        if (!std::isnan(m[d][a])) ss += (m[d][a] - mean[d][a]) * (m[d][a] - mean[d][a]);
      }
      sd[d][a] = std::sqrt(ss / n);
    }
  }
}

}  // namespace latentforce
