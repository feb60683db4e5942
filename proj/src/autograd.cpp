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

#include "latentforce/autograd.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "latentforce/errors.hpp"

namespace latentforce::ag {

Stats& stats() {
  static Stats s;
  return s;
}

void Graph::train(std::span<Parameter* const> params) {
  for (Parameter* p : params) trainable_[p] = p;
}

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(const Parameter& p) {
  Node n;
  n.external = &p.value;
  if (record_) {
    if (auto it = trainable_.find(&p); it != trainable_.end()) {
      n.requires_grad = true;
      n.target = it->second;
    }
  }
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Graph::value(Var v) const { return node_value(nodes_[v.id]); }

double Graph::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw ShapeError("scalar() on a non-scalar node");
  return m(0, 0);
}

Var Graph::record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var in : inputs) {
      if (nodes_[in.id].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

void Graph::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Matrix& Graph::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(value(v).rows(), value(v).cols());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (!record_) throw ContractError("backward() on a non-recording graph");
  if (value(loss).size() != 1) throw ShapeError("backward() needs a scalar loss");
  stats().backward_calls.fetch_add(1, std::memory_order_relaxed);
  Node& root = nodes_[loss.id];
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.target != nullptr) {
      if (n.target->grad.size() == 0) n.target->zero_grad();
      n.target->grad += n.grad;
    }
    if (n.backward) n.backward(*this, n.grad, node_value(n));
    // Intermediate gradients are no longer needed once propagated.
    if (n.target == nullptr) n.grad.resize(0, 0);
  }
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  if (av.cols() != bv.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix out = av * bv;
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& go, const Matrix&) {
    if (g.requires_grad(a)) g.grad_buffer(a).noalias() += go * g.value(b).transpose();
    if (g.requires_grad(b)) g.grad_buffer(b).noalias() += g.value(a).transpose() * go;
  });
}

Var linear(Graph& g, Var x, Var w, Var b) {
  const Matrix& xv = g.value(x);
  const Matrix& wv = g.value(w);
  const Matrix& bv = g.value(b);
  if (xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols()) {
    throw ShapeError("linear: expected x[R x " + std::to_string(wv.rows()) + "], got " +
                     std::to_string(xv.rows()) + "x" + std::to_string(xv.cols()));
  }
  Matrix out(xv.rows(), wv.cols());
  out.noalias() = xv * wv;
  out.rowwise() += bv.row(0);
  return g.record(std::move(out), {x, w, b},
                  [x, w, b](Graph& g, const Matrix& go, const Matrix&) {
                    if (g.requires_grad(x)) {
                      g.grad_buffer(x).noalias() += go * g.value(w).transpose();
                    }
                    if (g.requires_grad(w)) {
                      g.grad_buffer(w).noalias() += g.value(x).transpose() * go;
                    }
                    if (g.requires_grad(b)) g.grad_buffer(b) += go.colwise().sum();
                  });
}

Var add(Graph& g, Var a, Var b) {
  check_same_shape(g.value(a), g.value(b), "add");
  Matrix out = g.value(a) + g.value(b);
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& go, const Matrix&) {
    g.accumulate(a, go);
    g.accumulate(b, go);
  });
}

Var sub(Graph& g, Var a, Var b) {
  check_same_shape(g.value(a), g.value(b), "sub");
  Matrix out = g.value(a) - g.value(b);
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& go, const Matrix&) {
    g.accumulate(a, go);
    if (g.requires_grad(b)) g.grad_buffer(b) -= go;
  });
}

Var mul(Graph& g, Var a, Var b) {
  check_same_shape(g.value(a), g.value(b), "mul");
  Matrix out = g.value(a).cwiseProduct(g.value(b));
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& go, const Matrix&) {
    if (g.requires_grad(a)) g.accumulate(a, go.cwiseProduct(g.value(b)));
    if (g.requires_grad(b)) g.accumulate(b, go.cwiseProduct(g.value(a)));
  });
}

Var scale(Graph& g, Var a, double s) {
  Matrix out = g.value(a) * s;
  return g.record(std::move(out), {a}, [a, s](Graph& g, const Matrix& go, const Matrix&) {
    g.accumulate(a, go * s);
  });
}

namespace {
constexpr double kGeluK = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluC = 0.044715;
}  // namespace

Var gelu(Graph& g, Var a) {
  constexpr double k = kGeluK;
  constexpr double c = kGeluC;
  const Matrix& x = g.value(a);
  Matrix t = (k * (x.array() + c * x.array().cube())).tanh().matrix();
  Matrix out = (0.5 * x.array() * (1.0 + t.array())).matrix();
  return g.record(std::move(out), {a},
                  [a, t = std::move(t)](Graph& g, const Matrix& go, const Matrix&) {
                    const auto x = g.value(a).array();
                    auto d = 0.5 * (1.0 + t.array()) +
                             0.5 * x * (1.0 - t.array().square()) * kGeluK *
                                 (1.0 + 3.0 * kGeluC * x.square());
                    g.accumulate(a, (go.array() * d).matrix());
                  });
}

Var relu(Graph& g, Var a) {
  Matrix out = g.value(a).cwiseMax(0.0);
  return g.record(std::move(out), {a}, [a](Graph& g, const Matrix& go, const Matrix& out) {
    g.accumulate(a, (out.array() > 0).select(go.array(), 0.0).matrix());
  });
}

Var sigmoid(Graph& g, Var a) {
  Matrix out = (1.0 / (1.0 + (-g.value(a).array()).exp())).matrix();
  return g.record(std::move(out), {a}, [a](Graph& g, const Matrix& go, const Matrix& y) {
    g.accumulate(a, (go.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var tanh(Graph& g, Var a) {
  Matrix out = g.value(a).array().tanh().matrix();
  return g.record(std::move(out), {a}, [a](Graph& g, const Matrix& go, const Matrix& y) {
    g.accumulate(a, (go.array() * (1.0 - y.array().square())).matrix());
  });
}

Var exp(Graph& g, Var a) {
  Matrix out = g.value(a).array().exp().matrix();
  return g.record(std::move(out), {a}, [a](Graph& g, const Matrix& go, const Matrix& y) {
    g.accumulate(a, go.cwiseProduct(y));
  });
}

Var clamp(Graph& g, Var a, double lo, double hi) {
  Matrix out = g.value(a).cwiseMax(lo).cwiseMin(hi);
  return g.record(std::move(out), {a}, [a, lo, hi](Graph& g, const Matrix& go, const Matrix&) {
    const auto x = g.value(a).array();
    g.accumulate(a, ((x >= lo) && (x <= hi)).select(go.array(), 0.0).matrix());
  });
}

Var layer_norm(Graph& g, Var x, Var gamma, Var beta, double eps) {
  const Matrix& xv = g.value(x);
  const Matrix& gv = g.value(gamma);
  const Matrix& bv = g.value(beta);
  const auto cols = xv.cols();
  if (gv.cols() != cols || bv.cols() != cols) throw ShapeError("layer_norm: width mismatch");

  Matrix xhat(xv.rows(), cols);
  Eigen::VectorXd rstd(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    rstd(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * rstd(r);
  }
  Matrix out = (xhat.array().rowwise() * gv.row(0).array()).matrix();
  out.rowwise() += bv.row(0);

  return g.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd)](
                      Graph& g, const Matrix& go, const Matrix&) {
                    if (g.requires_grad(gamma)) {
                      g.grad_buffer(gamma) += go.cwiseProduct(xhat).colwise().sum();
                    }
                    if (g.requires_grad(beta)) g.grad_buffer(beta) += go.colwise().sum();
                    if (!g.requires_grad(x)) return;
                    const auto& gv = g.value(gamma);
                    Matrix dxhat = (go.array().rowwise() * gv.row(0).array()).matrix();
                    Matrix& dx = g.grad_buffer(x);
                    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                      const double m1 = dxhat.row(r).mean();
                      const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                      dx.row(r).array() +=
                          rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                    }
                  });
}

namespace {

using Strided = Eigen::Map<const Matrix, Eigen::Unaligned, Eigen::OuterStride<>>;
using StridedMut = Eigen::Map<Matrix, Eigen::Unaligned, Eigen::OuterStride<>>;

}  // namespace

Var attention(Graph& g, Var qkv, const AttentionLayout& layout, int heads) {
  const Matrix& x = g.value(qkv);
  if (x.cols() % 3 != 0) throw ShapeError("attention: qkv width must be 3D");
  const int d = static_cast<int>(x.cols() / 3);
  if (heads <= 0 || d % heads != 0) throw ShapeError("attention: D not divisible by heads");
  const int dh = d / heads;
  const int n = layout.group_len;
  const int stride = layout.stride;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto rows = x.rows();
  for (int base : layout.bases) {
    if (base < 0 || base + (n - 1) * static_cast<Eigen::Index>(stride) >= rows) {
      throw ShapeError("attention: group exceeds the token matrix");
    }
  }

  Matrix out(rows, d);
  const std::size_t groups = layout.bases.size();
  auto probs = std::make_shared<std::vector<Matrix>>(groups * heads);
  const Eigen::OuterStride<> xs(static_cast<Eigen::Index>(stride) * 3 * d);
  const Eigen::OuterStride<> os(static_cast<Eigen::Index>(stride) * d);

  for (std::size_t gi = 0; gi < groups; ++gi) {
    const double* row0 = x.data() + static_cast<Eigen::Index>(layout.bases[gi]) * 3 * d;
    double* out0 = out.data() + static_cast<Eigen::Index>(layout.bases[gi]) * d;
    for (int h = 0; h < heads; ++h) {
      Strided q(row0 + h * dh, n, dh, xs);
      Strided k(row0 + d + h * dh, n, dh, xs);
      Strided v(row0 + 2 * d + h * dh, n, dh, xs);
      Matrix s = scale * (q * k.transpose());
      for (int i = 0; i < n; ++i) {
        const int last = layout.causal ? i : n - 1;
        const double mx = s.row(i).head(last + 1).maxCoeff();
        double z = 0;
        for (int j = 0; j <= last; ++j) {
          s(i, j) = std::exp(s(i, j) - mx);
          z += s(i, j);
        }
        for (int j = 0; j <= last; ++j) s(i, j) /= z;
        for (int j = last + 1; j < n; ++j) s(i, j) = 0;
      }
      StridedMut o(out0 + h * dh, n, dh, os);
      o.noalias() = s * v;
      (*probs)[gi * heads + h] = std::move(s);
    }
  }

  return g.record(
      std::move(out), {qkv},
      [qkv, layout, heads, d, dh, n, scale, probs](Graph& g, const Matrix& go, const Matrix&) {
        const Matrix& x = g.value(qkv);
        Matrix& dx = g.grad_buffer(qkv);
        const Eigen::OuterStride<> xs(static_cast<Eigen::Index>(layout.stride) * 3 * d);
        const Eigen::OuterStride<> os(static_cast<Eigen::Index>(layout.stride) * d);
        for (std::size_t gi = 0; gi < layout.bases.size(); ++gi) {
          const Eigen::Index base = layout.bases[gi];
          const double* row0 = x.data() + base * 3 * d;
          double* drow0 = dx.data() + base * 3 * d;
          const double* go0 = go.data() + base * d;
          for (int h = 0; h < heads; ++h) {
            const Matrix& p = (*probs)[gi * heads + h];
            Strided q(row0 + h * dh, n, dh, xs);
            Strided k(row0 + d + h * dh, n, dh, xs);
            Strided v(row0 + 2 * d + h * dh, n, dh, xs);
            Strided dout(go0 + h * dh, n, dh, os);
            StridedMut dq(drow0 + h * dh, n, dh, xs);
            StridedMut dk(drow0 + d + h * dh, n, dh, xs);
            StridedMut dv(drow0 + 2 * d + h * dh, n, dh, xs);
            dv.noalias() += p.transpose() * dout;
            Matrix dp = dout * v.transpose();
            Eigen::VectorXd rowdot = p.cwiseProduct(dp).rowwise().sum();
            Matrix ds = p.cwiseProduct(dp - rowdot.replicate(1, n));
            ds *= scale;
            dq.noalias() += ds * k;
            dk.noalias() += ds.transpose() * q;
          }
        }
      });
}

Var gather_rows(Graph& g, Var x, std::vector<int> rows) {
  const Matrix& xv = g.value(x);
  Matrix out(static_cast<Eigen::Index>(rows.size()), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= xv.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = xv.row(rows[i]);
  }
  return g.record(std::move(out), {x},
                  [x, rows = std::move(rows)](Graph& g, const Matrix& go, const Matrix&) {
                    Matrix& dx = g.grad_buffer(x);
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                      dx.row(rows[i]) += go.row(static_cast<Eigen::Index>(i));
                    }
                  });
}

Var slice_cols(Graph& g, Var x, int start, int count) {
  const Matrix& xv = g.value(x);
  if (start < 0 || count < 0 || start + count > xv.cols()) {
    throw ShapeError("slice_cols: range out of bounds");
  }
  Matrix out = xv.middleCols(start, count);
  return g.record(std::move(out), {x}, [x, start, count](Graph& g, const Matrix& go, const Matrix&) {
    g.grad_buffer(x).middleCols(start, count) += go;
  });
}

Var concat_cols(Graph& g, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  const auto rows = g.value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (g.value(p).rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += g.value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, g.value(p).cols()) = g.value(p);
    at += g.value(p).cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return g.record(std::move(out), std::span<const Var>(ps),
                  [ps](Graph& g, const Matrix& go, const Matrix&) {
                    Eigen::Index at = 0;
                    for (Var p : ps) {
                      const auto c = g.value(p).cols();
                      if (g.requires_grad(p)) g.grad_buffer(p) += go.middleCols(at, c);
                      at += c;
                    }
                  });
}

Var sum(Graph& g, Var a) {
  Matrix out(1, 1);
  out(0, 0) = g.value(a).sum();
  return g.record(std::move(out), {a}, [a](Graph& g, const Matrix& go, const Matrix&) {
    g.grad_buffer(a).array() += go(0, 0);
  });
}

Var mean(Graph& g, Var a) {
  const double n = static_cast<double>(g.value(a).size());
  Matrix out(1, 1);
  out(0, 0) = g.value(a).sum() / n;
  return g.record(std::move(out), {a}, [a, n](Graph& g, const Matrix& go, const Matrix&) {
    g.grad_buffer(a).array() += go(0, 0) / n;
  });
}

Var sum_squares(Graph& g, Var a) {
  Matrix out(1, 1);
  out(0, 0) = g.value(a).squaredNorm();
  return g.record(std::move(out), {a}, [a](Graph& g, const Matrix& go, const Matrix&) {
    g.grad_buffer(a) += 2.0 * go(0, 0) * g.value(a);
  });
}

Var mean_abs_diff(Graph& g, Var a, Var b) {
  check_same_shape(g.value(a), g.value(b), "mean_abs_diff");
  const double n = static_cast<double>(g.value(a).size());
  Matrix out(1, 1);
  out(0, 0) = (g.value(a) - g.value(b)).cwiseAbs().sum() / n;
  return g.record(std::move(out), {a, b}, [a, b, n](Graph& g, const Matrix& go, const Matrix&) {
    Matrix sgn = (g.value(a) - g.value(b)).array().sign().matrix() * (go(0, 0) / n);
    if (g.requires_grad(a)) g.grad_buffer(a) += sgn;
    if (g.requires_grad(b)) g.grad_buffer(b) -= sgn;
  });
}

Var mean_pool_rows(Graph& g, Var x, int n) {
  const Matrix& xv = g.value(x);
  if (n <= 0 || xv.rows() % n != 0) throw ShapeError("mean_pool_rows: rows not divisible");
  const auto groups = xv.rows() / n;
  Matrix out(groups, xv.cols());
  for (Eigen::Index b = 0; b < groups; ++b) out.row(b) = xv.middleRows(b * n, n).colwise().mean();
  return g.record(std::move(out), {x}, [x, n](Graph& g, const Matrix& go, const Matrix&) {
    Matrix& dx = g.grad_buffer(x);
    for (Eigen::Index b = 0; b < go.rows(); ++b) {
      dx.middleRows(b * n, n).rowwise() += go.row(b) / n;
    }
  });
}

Var kl_standard_normal(Graph& g, Var mu, Var log_var) {
  check_same_shape(g.value(mu), g.value(log_var), "kl_standard_normal");
  const auto m = g.value(mu).array();
  const auto lv = g.value(log_var).array();
  const double n = static_cast<double>(m.size());
  Matrix out(1, 1);
  out(0, 0) = (-0.5 * (1.0 + lv - m.square() - lv.exp())).sum() / n;
  return g.record(std::move(out), {mu, log_var},
                  [mu, log_var, n](Graph& g, const Matrix& go, const Matrix&) {
                    const double s = go(0, 0) / n;
                    if (g.requires_grad(mu)) g.grad_buffer(mu) += s * g.value(mu);
                    if (g.requires_grad(log_var)) {
                      g.grad_buffer(log_var).array() +=
                          s * 0.5 * (g.value(log_var).array().exp() - 1.0);
                    }
                  });
}

Var unpatchify(Graph& g, Var tokens, int grid, int patch) {
  const Matrix& t = g.value(tokens);
  const int np = grid * grid;
  if (t.cols() != patch * patch || t.rows() % np != 0) throw ShapeError("unpatchify: bad shape");
  const auto batch = t.rows() / np;
  const int side = grid * patch;
  Matrix out(batch * side, side);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int p = 0; p < np; ++p) {
      const int py = p / grid;
      const int px = p % grid;
      for (int iy = 0; iy < patch; ++iy) {
        for (int ix = 0; ix < patch; ++ix) {
          out(b * side + py * patch + iy, px * patch + ix) = t(b * np + p, iy * patch + ix);
        }
      }
    }
  }
  return g.record(std::move(out), {tokens},
                  [tokens, grid, patch, np, side](Graph& g, const Matrix& go, const Matrix&) {
                    Matrix& dt = g.grad_buffer(tokens);
                    const auto batch = dt.rows() / np;
                    for (Eigen::Index b = 0; b < batch; ++b) {
                      for (int p = 0; p < np; ++p) {
                        const int py = p / grid;
                        const int px = p % grid;
                        for (int iy = 0; iy < patch; ++iy) {
                          for (int ix = 0; ix < patch; ++ix) {
                            dt(b * np + p, iy * patch + ix) +=
                                go(b * side + py * patch + iy, px * patch + ix);
                          }
                        }
                      }
                    }
                  });
}

Var avg_pool2(Graph& g, Var images, int height) {
  const Matrix& x = g.value(images);
  if (height % 2 != 0 || x.cols() % 2 != 0 || x.rows() % height != 0) {
    throw ShapeError("avg_pool2: dimensions must be even");
  }
  const auto rows = x.rows() / 2;
  const auto cols = x.cols() / 2;
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = 0.25 * (x(2 * r, 2 * c) + x(2 * r, 2 * c + 1) + x(2 * r + 1, 2 * c) +
                          x(2 * r + 1, 2 * c + 1));
    }
  }
  // Image boundaries coincide with pooling windows because H is even.
  return g.record(std::move(out), {images}, [images](Graph& g, const Matrix& go, const Matrix&) {
    Matrix& dx = g.grad_buffer(images);
    for (Eigen::Index r = 0; r < go.rows(); ++r) {
      for (Eigen::Index c = 0; c < go.cols(); ++c) {
        const double v = 0.25 * go(r, c);
        dx(2 * r, 2 * c) += v;
        dx(2 * r, 2 * c + 1) += v;
        dx(2 * r + 1, 2 * c) += v;
        dx(2 * r + 1, 2 * c + 1) += v;
      }
    }
  });
}

Var sobel_magnitude(Graph& g, Var images, int height, double eps) {
  const Matrix& x = g.value(images);
  if (height < 3 || x.cols() < 3 || x.rows() % height != 0) {
    throw ShapeError("sobel_magnitude: images must be at least 3x3");
  }
  const auto batch = x.rows() / height;
  const int oh = height - 2;
  const auto ow = x.cols() - 2;
  Matrix out(batch * oh, ow);
  Matrix gx(batch * oh, ow);
  Matrix gy(batch * oh, ow);
  const double eps2 = eps * eps;
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int y = 1; y <= oh; ++y) {
      const Eigen::Index r = b * height + y;
      for (Eigen::Index c = 1; c <= ow; ++c) {
        const double sx = (x(r - 1, c + 1) + 2 * x(r, c + 1) + x(r + 1, c + 1)) -
                          (x(r - 1, c - 1) + 2 * x(r, c - 1) + x(r + 1, c - 1));
        const double sy = (x(r + 1, c - 1) + 2 * x(r + 1, c) + x(r + 1, c + 1)) -
                          (x(r - 1, c - 1) + 2 * x(r - 1, c) + x(r - 1, c + 1));
        const Eigen::Index o = b * oh + y - 1;
        gx(o, c - 1) = sx;
        gy(o, c - 1) = sy;
        out(o, c - 1) = std::sqrt(sx * sx + sy * sy + eps2);
      }
    }
  }
  return g.record(
      std::move(out), {images},
      [images, height, oh, gx = std::move(gx), gy = std::move(gy)](Graph& g, const Matrix& go,
                                                                  const Matrix& mag) {
        Matrix& dx = g.grad_buffer(images);
        const auto batch = go.rows() / oh;
        const auto ow = go.cols();
        for (Eigen::Index b = 0; b < batch; ++b) {
          for (int y = 1; y <= oh; ++y) {
            const Eigen::Index r = b * height + y;
            for (Eigen::Index c = 1; c <= ow; ++c) {
              const Eigen::Index o = b * oh + y - 1;
              const double m = mag(o, c - 1);
              const double ax = go(o, c - 1) * gx(o, c - 1) / m;
              const double ay = go(o, c - 1) * gy(o, c - 1) / m;
              dx(r - 1, c + 1) += ax;
              dx(r, c + 1) += 2 * ax;
              dx(r + 1, c + 1) += ax;
              dx(r - 1, c - 1) -= ax;
              dx(r, c - 1) -= 2 * ax;
              dx(r + 1, c - 1) -= ax;
              dx(r + 1, c - 1) += ay;
              dx(r + 1, c) += 2 * ay;
              dx(r + 1, c + 1) += ay;
              dx(r - 1, c - 1) -= ay;
              dx(r - 1, c) -= 2 * ay;
              dx(r - 1, c + 1) -= ay;
            }
          }
        }
      });
}

Var im2col3x3(Graph& g, Var x, int side) {
  const Matrix& xv = g.value(x);
  const int cells = side * side;
  if (side <= 0 || xv.rows() % cells != 0) throw ShapeError("im2col3x3: rows not a grid");
  const auto batch = xv.rows() / cells;
  const auto ch = xv.cols();
  Matrix out = Matrix::Zero(xv.rows(), 9 * ch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int y = 0; y < side; ++y) {
      for (int xx = 0; xx < side; ++xx) {
        const Eigen::Index r = b * cells + y * side + xx;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= side) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= side) continue;
            out.block(r, (ky * 3 + kx) * ch, 1, ch) = xv.row(b * cells + sy * side + sx);
          }
        }
      }
    }
  }
  return g.record(std::move(out), {x}, [x, side, cells](Graph& g, const Matrix& go, const Matrix&) {
    Matrix& dx = g.grad_buffer(x);
    const auto ch = dx.cols();
    const auto batch = dx.rows() / cells;
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int y = 0; y < side; ++y) {
        for (int xx = 0; xx < side; ++xx) {
          const Eigen::Index r = b * cells + y * side + xx;
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= side) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = xx + kx - 1;
              if (sx < 0 || sx >= side) continue;
              dx.row(b * cells + sy * side + sx) += go.block(r, (ky * 3 + kx) * ch, 1, ch);
            }
          }
        }
      }
    }
  });
}

}  // namespace latentforce::ag
