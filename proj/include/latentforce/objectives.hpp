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

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latentforce/model.hpp"
#include "latentforce/sample.hpp"

namespace latentforce {

class Config;

struct LossWeights {
  double lambda_kl = 1e-3;
  double lambda_eq = 1.0;
  double lambda_lpips = 1.0;

  /// Throws ConfigError unless every weight is finite and non-negative.
  void validate() const;
  static LossWeights from_config(const Config& config);
};

struct LossBreakdown {
  double recon = 0;
  double kl = 0;
  double eq = 0;
  double total = 0;
};

/// recon + lambda_kl * kl + lambda_eq * eq.
double weighted_total(double recon, double kl, double eq, const LossWeights& w);

// Value-level losses. Images are [H x W] (or stacks [B*H x W]) in [0, 1].

/// Multi-scale Sobel-magnitude L1 at scales 1, 1/2 and 1/4, averaged.
double perceptual_surrogate(const Matrix& pred, const Matrix& target, int height = -1);
double recon_loss(const Matrix& pred, const Matrix& target, double lambda_lpips);
double kl_loss(const Posterior& post);
/// (1 / N_p) * ||z_l - z_r||^2.
double eq_loss(const Matrix& z_left, const Matrix& z_right);
/// All four branches of a pair forward against the contact frames of each
/// sensor. Missing branches raise ContractError.
LossBreakdown total_loss(const PairForward& fwd, const Matrix& cur_left,
                         const Matrix& cur_right, const LossWeights& w);

// Graph-level losses used by training.

ag::Var perceptual_surrogate(ag::Graph& g, ag::Var pred, ag::Var target, int height);
/// Mean over the stacked images of L1 + lambda_lpips * surrogate.
ag::Var recon_loss(ag::Graph& g, ag::Var pred, ag::Var target, int height, double lambda_lpips);
/// Batch-mean of (1 / N_p) * ||z_l - z_r||^2 over B stacked pairs.
ag::Var eq_loss(ag::Graph& g, ag::Var z_left, ag::Var z_right, int n_patches);

/// A stack of B pairs in the layout the model consumes.
struct PairBatch {
  ObservationBatch left;
  ObservationBatch right;
  Matrix target_left;   // [B*S x S]
  Matrix target_right;  // [B*S x S]
  std::vector<std::string> ids;
};

/// With `swap[i]` set, pair i enters with its fingers exchanged.
PairBatch make_batch(const Model& model, std::span<const PairSample* const> samples,
                     const std::vector<bool>& swap = {});

struct BatchLoss {
  ag::Var total;
  LossBreakdown parts;
};

/// Encodes both fingers, samples z (or uses mu without `rng`), decodes the
/// four branches and assembles the weighted objective.
BatchLoss batch_loss(ag::Graph& g, const Model& model, const PairBatch& batch,
                     const LossWeights& w, std::mt19937_64* rng);

/// Decoupled-weight-decay Adam.
class AdamW {
 public:
  AdamW(std::vector<ag::Parameter*> params, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step(double lr);
  /// Scales gradients so their global norm is at most `max_norm`; returns
  /// the norm before clipping.
  double clip_grad_norm(double max_norm);
  std::int64_t steps() const { return t_; }

 private:
  std::vector<ag::Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double wd_;
  double b1_;
  double b2_;
  double eps_;
  std::int64_t t_ = 0;
};

struct TrainConfig {
  int batch_size = 8;
  int epochs = 10;
  int max_steps = 0;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  bool cosine = true;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 1;
  LossWeights weights;

  void validate() const;
  static TrainConfig from_config(const Config& config);
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double lr = 0;
  LossBreakdown loss;
};

struct TrainCallbacks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(int epoch, const LossBreakdown& mean)> on_epoch;
  /// Called after each epoch selected by checkpoint_every.
  std::function<void(int epoch)> on_checkpoint;
  /// Persists a failing batch; the returned path is reported in the error.
  std::function<std::string(const PairBatch&)> dump_batch;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<LossBreakdown> epochs;
};

/// Number of optimizer steps a run will take.
int planned_steps(std::size_t n_samples, const TrainConfig& cfg);

/// Optimizes every model parameter on L_total. A non-finite loss raises
/// NumericError naming the batch.
TrainResult train(Model& model, const std::vector<PairSample>& samples, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks = {});

/// Mean breakdown over a set with z = mu and no parameter updates.
LossBreakdown evaluate(const Model& model, const std::vector<PairSample>& samples,
                       const LossWeights& w, int batch_size = 16);

}  // namespace latentforce
