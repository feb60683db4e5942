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

#include <array>
#include <span>
#include <vector>

namespace latentforce {

/// Sample Pearson coefficient. Throws ArgumentError for unequal lengths or
/// fewer than two points and UndefinedError when either side is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// 1 - SS_res / SS_tot; UndefinedError for a constant y_true.
double r2(std::span<const double> y_true, std::span<const double> y_pred);

/// Mean absolute error.
double mae(std::span<const double> y_true, std::span<const double> y_pred);

constexpr int kForceAxes = 3;  // F_x, F_y, F_z

/// r[latent dim][force axis]; undefined cells hold NaN.
using PearsonMatrix = std::array<std::array<double, kForceAxes>, 6>;

struct LatentSample {
  std::array<double, 6> z{};
  std::array<double, kForceAxes> force{};
};

PearsonMatrix pearson_matrix(std::span<const LatentSample> samples);

/// Cell-wise mean and population SD over matrices, skipping undefined cells.
/// A cell undefined in every input stays NaN.
void matrix_mean_sd(std::span<const PearsonMatrix> ms, PearsonMatrix& mean, PearsonMatrix& sd);

}  // namespace latentforce
