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
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "latentforce/autograd.hpp"
#include "latentforce/canonicalize.hpp"

namespace latentforce {

class Config;

using ag::Matrix;

/// Latent channels per patch.
constexpr int kLatentDim = 6;
/// Temporal positions per observation: reference and contact.
constexpr int kFrames = 2;
constexpr double kLogVarClamp = 10.0;

struct ModelConfig {
  int image_size = 224;
  int patch_size = 16;
  int embed_dim = 256;
  int depth = 4;
  int heads = 8;
  int decoder_depth = 4;
  int mlp_ratio = 2;
  std::uint64_t seed = 0;

  int grid() const { return image_size / patch_size; }
  int n_patches() const { return grid() * grid(); }
  int patch_pixels() const { return patch_size * patch_size; }

  /// Throws ConfigError on inconsistent sizes.
  void validate() const;

  static ModelConfig from_config(const Config& config);
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Diagonal Gaussian over the latent force map, both [N_p x 6].
struct Posterior {
  Matrix mu;
  Matrix log_var;
};

/// Pixel blocks of a square model-size image: [N_p x P*P], values in [0, 1].
Matrix image_to_patches(const Image8& image, int patch_size);
/// Image rows stacked for the loss ops: [S x S], values in [0, 1].
Matrix image_to_matrix(const Image8& image);
Image8 matrix_to_image(const Matrix& m);

/// A stack of B observations, already in patch form.
struct ObservationBatch {
  int size = 0;
  Matrix ref;  // [B*N_p x P*P]
  Matrix cur;  // [B*N_p x P*P]

  void append(const Matrix& ref_patches, const Matrix& cur_patches);
};

/// Token stream after each temporal block, rows ordered (obs, t, patch).
using TemporalTrace = std::vector<Matrix>;

struct EncoderVars {
  ag::Var mu;       // [B*N_p x 6]
  ag::Var log_var;  // [B*N_p x 6], clamped
};

enum class Branch { kLL = 0, kLR = 1, kRL = 2, kRR = 3 };
constexpr std::array<Branch, 4> kBranches = {Branch::kLL, Branch::kLR, Branch::kRL, Branch::kRR};
/// "LL", "LR", "RL", "RR": source latent, then reference/target sensor.
const char* to_string(Branch b);

struct PairForward {
  Matrix z_left;
  Matrix z_right;
  Posterior post_left;
  Posterior post_right;
  /// Indexed by Branch; branch (i, j) decodes z_i against I_ref^j.
  std::array<Matrix, 4> recon;
};

/// Conditional VAE over tactile observations. The encoder alternates spatial
/// attention within each frame and causal temporal attention across the
/// (reference, contact) pair; the decoder adds a projection of z to the patch
/// embedding of the reference image.
///
/// Parameters live behind a stable heap allocation, so Parameter pointers
/// handed out by `parameters()` survive moves of the Model.
class Model {
 public:
  explicit Model(const ModelConfig& config);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelConfig& config() const;

  std::vector<ag::Parameter*> parameters();
  std::vector<const ag::Parameter*> parameters() const;
  std::vector<ag::Parameter*> encoder_parameters();
  std::vector<const ag::Parameter*> encoder_parameters() const;
  ag::Parameter* find(const std::string& name);
  std::int64_t parameter_count() const;
  /// FNV-1a over names, shapes and raw values.
  std::uint64_t checksum() const;
  std::uint64_t encoder_checksum() const;

  /// Embedded tokens plus positional encoding, [(B*2*N_p) x D].
  ag::Var embed_tokens(ag::Graph& g, const ObservationBatch& batch) const;
  EncoderVars encode_graph(ag::Graph& g, const ObservationBatch& batch,
                           TemporalTrace* trace = nullptr) const;
  /// Returns pixel probabilities as patch tokens, [B*N_p x P*P].
  ag::Var decode_graph(ag::Graph& g, const Matrix& ref_patches, ag::Var z) const;

  /// Patch tokens of one observation, [2*N_p x D], frame-major.
  Matrix patchify(const TactileObservation& obs) const;
  Posterior encode(const TactileObservation& obs) const;
  /// Posterior means for a whole batch, [B*N_p x 6].
  Matrix encode_mean(const ObservationBatch& batch) const;
  /// Decoded image at model size, values in [0, 1].
  Matrix decode(const MarkerImage& ref, const Matrix& z) const;
  PairForward forward_pair(const TactileObservation& left, const TactileObservation& right,
                           std::mt19937_64* rng = nullptr) const;

  /// Patch matrix of a model-size image; throws ShapeError on a size mismatch.
  Matrix patches(const MarkerImage& image) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// z = mu + exp(log_var / 2) * eps, or mu exactly when eps is null.
Matrix sample(const Posterior& post, const Matrix* eps);

/// Order in which training samples stack latents for the four decodes.
std::vector<int> branch_latent_rows(int batch, int n_patches);

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ULL);

}  // namespace latentforce
