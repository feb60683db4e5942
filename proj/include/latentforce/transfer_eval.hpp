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
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "latentforce/checkpoint.hpp"
#include "latentforce/metrics.hpp"
#include "latentforce/model.hpp"

namespace latentforce {

class Config;

using Force3 = std::array<double, kForceAxes>;

/// Consecutive frames of one episode seen by one sensor, with labels.
struct LabeledSequence {
  std::string episode_id;
  std::string indenter_id;
  std::vector<TactileObservation> frames;
  std::vector<Force3> forces;
};

/// The same sequence after the frozen encoder: posterior means per frame.
struct EncodedSequence {
  std::string episode_id;
  std::string indenter_id;
  std::vector<Matrix> mu;  // [N_p x 6] per frame
  std::vector<Force3> forces;
};

/// Inference-only encoding (z = mu) in batches.
EncodedSequence encode_sequence(const Model& encoder, const LabeledSequence& seq,
                                int batch_size = 32);

/// Patch-averaged latent per frame paired with its force.
std::vector<LatentSample> latent_samples(const EncodedSequence& seq);

struct SensorLatents {
  std::string sensor;
  std::vector<LatentSample> samples;
};

/// Pearson matrices per sensor and pooled, plus the cell-wise mean and SD
/// across sensors.
struct CorrelationAnalysis {
  std::vector<std::string> sensors;
  std::vector<PearsonMatrix> per_sensor;
  std::vector<std::size_t> counts;
  PearsonMatrix pooled{};
  std::size_t pooled_n = 0;
  PearsonMatrix mean{};
  PearsonMatrix sd{};

  /// Latent dimension with the largest |r| against `axis`, or -1.
  static int best_dim(const PearsonMatrix& m, int axis);
};

CorrelationAnalysis latent_correlation_analysis(const std::vector<SensorLatents>& sensors);

/// Rows z0..z5; columns r_fx, r_fy, r_fz, sd_fx, sd_fy, sd_fz, with r the
/// mean over sensors. Undefined cells are written as "nan".
std::string correlation_csv(const CorrelationAnalysis& a);
std::string correlation_json(const CorrelationAnalysis& a);

struct HeadConfig {
  int window = 5;
  int channels = 16;
  int hidden = 32;
  int steps = 1500;
  int batch_size = 32;
  double lr = 3e-3;
  std::uint64_t seed = 0;

  void validate() const;
  static HeadConfig from_config(const Config& config);
};

/// Force regression from a window of latent maps: two 3x3 convolutions per
/// frame over the sqrt(N_p) grid, a convolutional GRU across the window, mean
/// pooling and a two-layer perceptron to (F_x, F_y, F_z).
class ForceHead {
 public:
  ForceHead(const HeadConfig& config, int grid);
  ~ForceHead();
  ForceHead(ForceHead&&) noexcept;
  ForceHead& operator=(ForceHead&&) noexcept;

  const HeadConfig& config() const;
  int grid() const;
  std::vector<ag::Parameter*> parameters();

  /// Input normalization and target standardization fitted on the source.
  void set_normalization(const std::array<double, 6>& in_mean, const std::array<double, 6>& in_std,
                         const Force3& y_mean, const Force3& y_std);

  /// `windows` is [B*L*N_p x 6] raw latents, window-major then frame; the
  /// result is [B x 3] in standardized target units.
  ag::Var forward(ag::Graph& g, const Matrix& windows) const;
  /// Forces in N, [B x 3].
  Matrix predict(const Matrix& windows) const;
  Force3 to_newtons(const Eigen::RowVectorXd& standardized) const;
  Eigen::RowVectorXd standardize(const Force3& f) const;

  Checkpoint to_checkpoint() const;
  static ForceHead from_checkpoint(const Checkpoint& ckpt);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Window k covers frames k-L+1..k of one sequence and is labelled with the
/// force at frame k.
struct WindowRef {
  const EncodedSequence* seq = nullptr;
  int end = 0;
};
std::vector<WindowRef> make_windows(const std::vector<EncodedSequence>& seqs, int window);
Matrix stack_windows(std::span<const WindowRef> refs, int window);

struct HeadHooks {
  /// Runs after every head step; tests use it to tamper with the encoder.
  std::function<void(int step)> on_step;
};

/// Fits a head on pre-encoded source sequences.
ForceHead train_head(const std::vector<EncodedSequence>& source, const HeadConfig& config,
                     int grid, const HeadHooks& hooks = {});

/// Encodes the source with the frozen encoder, trains a head and verifies the
/// encoder checksum is unchanged; FrozenViolationError otherwise.
ForceHead train_head(const Model& encoder, const std::vector<LabeledSequence>& source,
                     const HeadConfig& config, const HeadHooks& hooks = {});

struct EvalReport {
  std::string source;
  std::string target;
  bool self_eval = false;
  std::size_t n = 0;
  Force3 r2{};
  Force3 mae{};
  PearsonMatrix pearson{};
  PearsonMatrix pearson_sd{};  // across target episodes

  std::string to_json() const;
};

/// Applies the head to every window of the target set without any gradient
/// computation or parameter update (ContractError if either counter moves).
EvalReport zero_shot_eval(const ForceHead& head, const std::vector<EncodedSequence>& target,
                          const std::string& source_id, const std::string& target_id);
EvalReport zero_shot_eval(const ForceHead& head, const Model& encoder,
                          const std::vector<LabeledSequence>& target,
                          const std::string& source_id, const std::string& target_id);

}  // namespace latentforce
