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

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace latentforce::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable array. `decay` marks weight matrices that take
/// decoupled weight decay (biases and norm gains do not).
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool decay = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Counters used by audits: how many backward passes ran and how many times
/// an optimizer wrote to parameters.
struct Stats {
  std::atomic<std::int64_t> backward_calls{0};
  std::atomic<std::int64_t> parameter_updates{0};
};
Stats& stats();

struct Var {
  int id = -1;
};

/// Tape of matrix-valued nodes. Nodes are appended in evaluation order, so a
/// reverse sweep over the tape is a valid backward order.
class Graph {
 public:
  using BackwardFn =
      std::function<void(Graph&, const Matrix& grad_out, const Matrix& out)>;

  /// With `record == false` no backward closures are kept (inference).
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Registers parameters whose gradients should be accumulated. Any other
  /// parameter passed to `param` is treated as a constant.
  void train(std::span<Parameter* const> params);

  Var constant(Matrix value);
  Var param(const Parameter& p);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape. Gradients of registered
  /// parameters are added to Parameter::grad.
  void backward(Var loss);

  /// Appends an op result. `fn` is dropped when no input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(fn));
  }
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn);

  /// Adds `g` into the gradient of `v` (no-op for constants).
  void accumulate(Var v, const Matrix& g);
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }
  /// Mutable gradient buffer, allocated and zeroed on first use.
  Matrix& grad_buffer(Var v);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* target = nullptr;
  };
  const Matrix& node_value(const Node& n) const { return n.external ? *n.external : n.value; }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, Parameter*> trainable_;
  bool record_;
};

// Dense algebra.
Var matmul(Graph& g, Var a, Var b);
/// x * W + b with b a 1 x out row broadcast over rows.
Var linear(Graph& g, Var x, Var w, Var b);
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double s);

// Element-wise nonlinearities.
Var gelu(Graph& g, Var a);
Var relu(Graph& g, Var a);
Var sigmoid(Graph& g, Var a);
Var tanh(Graph& g, Var a);
Var exp(Graph& g, Var a);
/// Hard clamp; the gradient is zero outside [lo, hi].
Var clamp(Graph& g, Var a, double lo, double hi);

/// Row-wise layer normalization with affine gain/shift (1 x C each).
Var layer_norm(Graph& g, Var x, Var gamma, Var beta, double eps = 1e-5);

/// Groups of rows that attend to each other: member i of group k is row
/// bases[k] + i * stride. With `causal`, member i sees members 0..i only.
struct AttentionLayout {
  int group_len = 0;
  int stride = 1;
  bool causal = false;
  std::vector<int> bases;
};

/// Multi-head scaled dot-product attention over a packed [R x 3D] q|k|v
/// matrix; returns [R x D].
Var attention(Graph& g, Var qkv, const AttentionLayout& layout, int heads);

// Reshaping.
Var gather_rows(Graph& g, Var x, std::vector<int> rows);
Var slice_cols(Graph& g, Var x, int start, int count);
Var concat_cols(Graph& g, std::span<const Var> parts);

// Reductions.
Var sum(Graph& g, Var a);
Var mean(Graph& g, Var a);
Var sum_squares(Graph& g, Var a);
/// mean(|a - b|)
Var mean_abs_diff(Graph& g, Var a, Var b);
/// [B*n x C] -> [B x C], averaging each block of n consecutive rows.
Var mean_pool_rows(Graph& g, Var x, int n);
/// Mean over all entries of -0.5 * (1 + log_var - mu^2 - exp(log_var)).
Var kl_standard_normal(Graph& g, Var mu, Var log_var);

// Images stacked vertically: [B*H x W].
/// Patch tokens [B*G*G x P*P] -> images [B*G*P x G*P].
Var unpatchify(Graph& g, Var tokens, int grid, int patch);
/// 2 x 2 average pooling; H and W must be even.
Var avg_pool2(Graph& g, Var images, int height);
/// Sobel gradient magnitude sqrt(gx^2 + gy^2 + eps^2) on the interior,
/// [B*H x W] -> [B*(H-2) x (W-2)].
Var sobel_magnitude(Graph& g, Var images, int height, double eps = 1e-6);

/// 3 x 3 zero-padded neighbourhoods of a [B*S*S x C] grid -> [B*S*S x 9C],
/// column block (ky * 3 + kx) holding offset (ky - 1, kx - 1).
Var im2col3x3(Graph& g, Var x, int side);

}  // namespace latentforce::ag
