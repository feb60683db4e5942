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

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "latentforce/autograd.hpp"
#include "latentforce/errors.hpp"
#include "support/test_support.hpp"

namespace ag = latentforce::ag;
using latentforce::Matrix;

namespace {

struct Leaves {
  std::vector<ag::Parameter> store;
  std::vector<ag::Parameter*> ptrs;

  Leaves(std::initializer_list<std::pair<int, int>> shapes, std::mt19937_64& rng) {
    store.reserve(shapes.size());
    int i = 0;
    for (auto [r, c] : shapes) {
      store.push_back({"leaf" + std::to_string(i++), lftest::random_matrix(r, c, rng), {}, true});
    }
    for (auto& p : store) ptrs.push_back(&p);
  }

  std::vector<ag::Var> vars(ag::Graph& g) const {
    std::vector<ag::Var> v;
    for (const auto& p : store) v.push_back(g.param(p));
    return v;
  }
};

// Contracts an op output against a fixed random weight so every output entry
// contributes a distinct amount to the scalar.
ag::Var project(ag::Graph& g, ag::Var v, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  const Matrix& x = g.value(v);
  return ag::sum(g, ag::mul(g, v, g.constant(lftest::random_matrix(x.rows(), x.cols(), rng))));
}

void expect_grads(Leaves& leaves, const std::function<ag::Var(ag::Graph&, std::vector<ag::Var>&)>& f,
                  double tol = 1e-6) {
  std::vector<lftest::GradEntry> entries;
  for (auto* p : leaves.ptrs) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) entries.push_back({p, i});
  }
  auto loss = [&](ag::Graph& g) {
    auto v = leaves.vars(g);
    return f(g, v);
  };
  const auto res = lftest::check_gradients(leaves.ptrs, entries, loss, 1e-5, 1e-3);
  CHECK(res.checked == static_cast<int>(entries.size()));
  CHECK(res.max_rel_error < tol);
}

}  // namespace

TEST_CASE("elementwise and matrix ops match central differences") {
  std::mt19937_64 rng(1);
  SUBCASE("matmul") {
    Leaves l({{3, 4}, {4, 2}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) { return project(g, ag::matmul(g, v[0], v[1])); });
  }
  SUBCASE("linear") {
    Leaves l({{5, 3}, {3, 4}, {1, 4}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) { return project(g, ag::linear(g, v[0], v[1], v[2])); });
  }
  SUBCASE("add sub mul scale") {
    Leaves l({{3, 3}, {3, 3}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) {
      auto a = ag::add(g, v[0], v[1]);
      auto b = ag::sub(g, v[0], ag::scale(g, v[1], 2.5));
      return project(g, ag::mul(g, a, b));
    });
  }
  SUBCASE("gelu sigmoid tanh exp") {
    Leaves l({{4, 5}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) {
      auto a = ag::gelu(g, v[0]);
      auto b = ag::sigmoid(g, v[0]);
      auto c = ag::tanh(g, v[0]);
      auto d = ag::exp(g, ag::scale(g, v[0], 0.3));
      return ag::add(g, ag::add(g, project(g, a, 1), project(g, b, 2)),
                     ag::add(g, project(g, c, 3), project(g, d, 4)));
    });
  }
  SUBCASE("relu and clamp away from kinks") {
    ag::Parameter p{"x", Matrix(2, 3), {}, true};
    p.value << -1.3, 0.4, 2.2, 0.9, -0.2, -3.1;
    Leaves l({}, rng);
    l.store.push_back(p);
    l.ptrs = {&l.store[0]};
    expect_grads(l, [](ag::Graph& g, auto& v) {
      return ag::add(g, project(g, ag::relu(g, v[0]), 5), project(g, ag::clamp(g, v[0], -1.0, 1.0), 6));
    });
  }
  SUBCASE("layer_norm") {
    Leaves l({{4, 6}, {1, 6}, {1, 6}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) {
      return project(g, ag::layer_norm(g, v[0], v[1], v[2]));
    });
  }
}

TEST_CASE("attention gradients, plain and causal, strided groups") {
  std::mt19937_64 rng(2);
  ag::AttentionLayout spatial;
  spatial.group_len = 3;
  spatial.stride = 1;
  spatial.bases = {0, 3};
  ag::AttentionLayout temporal;
  temporal.group_len = 2;
  temporal.stride = 3;
  temporal.causal = true;
  temporal.bases = {0, 1, 2};
  Leaves l({{6, 12}}, rng);
  expect_grads(l, [&](ag::Graph& g, auto& v) {
    auto a = ag::attention(g, v[0], spatial, 2);
    auto b = ag::attention(g, v[0], temporal, 2);
    return ag::add(g, project(g, a, 7), project(g, b, 8));
  });
}

TEST_CASE("attention matches a direct softmax evaluation") {
  std::mt19937_64 rng(3);
  const Matrix qkv = lftest::random_matrix(2, 6, rng);
  ag::AttentionLayout causal;
  causal.group_len = 2;
  causal.stride = 1;
  causal.causal = true;
  causal.bases = {0};
  ag::Graph g(false);
  const Matrix out = g.value(ag::attention(g, g.constant(qkv), causal, 1));
  // One head, D = 2: the first token sees only itself.
  CHECK(out(0, 0) == doctest::Approx(qkv(0, 4)).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(qkv(0, 5)).epsilon(1e-12));
  const double s0 = (qkv(1, 0) * qkv(0, 2) + qkv(1, 1) * qkv(0, 3)) / std::sqrt(2.0);
  const double s1 = (qkv(1, 0) * qkv(1, 2) + qkv(1, 1) * qkv(1, 3)) / std::sqrt(2.0);
  const double w0 = std::exp(s0) / (std::exp(s0) + std::exp(s1));
  CHECK(out(1, 0) == doctest::Approx(w0 * qkv(0, 4) + (1 - w0) * qkv(1, 4)).epsilon(1e-12));
}

TEST_CASE("reshaping and reduction ops") {
  std::mt19937_64 rng(4);
  SUBCASE("gather slice concat") {
    Leaves l({{4, 5}, {4, 2}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) {
      auto a = ag::gather_rows(g, v[0], {3, 0, 0, 2});
      auto b = ag::slice_cols(g, a, 1, 3);
      std::vector<ag::Var> parts = {b, v[1]};
      return project(g, ag::concat_cols(g, parts));
    });
  }
  SUBCASE("sum mean sum_squares mean_abs_diff") {
    Leaves l({{3, 4}, {3, 4}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) {
      auto a = ag::add(g, ag::sum(g, v[0]), ag::mean(g, v[1]));
      auto b = ag::add(g, ag::sum_squares(g, v[0]), ag::mean_abs_diff(g, v[0], v[1]));
      return ag::add(g, a, b);
    });
  }
  SUBCASE("mean_pool_rows") {
    Leaves l({{6, 3}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) { return project(g, ag::mean_pool_rows(g, v[0], 3)); });
  }
  SUBCASE("kl_standard_normal") {
    Leaves l({{4, 6}, {4, 6}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) { return ag::kl_standard_normal(g, v[0], v[1]); });
  }
}

TEST_CASE("image ops") {
  std::mt19937_64 rng(5);
  SUBCASE("unpatchify") {
    Leaves l({{8, 4}}, rng);  // two images, 2x2 grid of 2x2 patches
    expect_grads(l, [](ag::Graph& g, auto& v) { return project(g, ag::unpatchify(g, v[0], 2, 2)); });
  }
  SUBCASE("avg_pool2") {
    Leaves l({{8, 6}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) { return project(g, ag::avg_pool2(g, v[0], 4)); });
  }
  SUBCASE("sobel_magnitude") {
    Leaves l({{10, 6}}, rng);
    expect_grads(l, [](ag::Graph& g, auto& v) { return project(g, ag::sobel_magnitude(g, v[0], 5)); });
  }
  SUBCASE("im2col3x3") {
    Leaves l({{18, 2}}, rng);  // two 3x3 grids, 2 channels
    expect_grads(l, [](ag::Graph& g, auto& v) { return project(g, ag::im2col3x3(g, v[0], 3)); });
  }
}

TEST_CASE("unpatchify places patch pixels row-major") {
  Matrix t(4, 4);
  for (int i = 0; i < 16; ++i) t.data()[i] = i;
  ag::Graph g(false);
  const Matrix img = g.value(ag::unpatchify(g, g.constant(t), 2, 2));
  REQUIRE(img.rows() == 4);
  REQUIRE(img.cols() == 4);
  CHECK(img(0, 0) == 0);
  CHECK(img(0, 1) == 1);
  CHECK(img(1, 0) == 2);
  CHECK(img(0, 2) == 4);   // patch 1 top-left
  CHECK(img(2, 0) == 8);   // patch 2 top-left
  CHECK(img(3, 3) == 15);
}

TEST_CASE("sobel of a vertical step edge") {
  Matrix img = Matrix::Zero(3, 4);
  img.rightCols(2).setOnes();
  ag::Graph g(false);
  const Matrix s = g.value(ag::sobel_magnitude(g, g.constant(img), 3, 0.0));
  REQUIRE(s.rows() == 1);
  REQUIRE(s.cols() == 2);
  CHECK(s(0, 0) == doctest::Approx(4.0));
  CHECK(s(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("im2col3x3 zero-pads at the border") {
  Matrix x(4, 1);
  x << 1, 2, 3, 4;  // 2x2 grid
  ag::Graph g(false);
  const Matrix c = g.value(ag::im2col3x3(g, g.constant(x), 2));
  REQUIRE(c.cols() == 9);
  // Cell (0,0): neighbourhood rows -1..1, cols -1..1, centre at column 4.
  CHECK(c(0, 4) == 1);
  CHECK(c(0, 5) == 2);
  CHECK(c(0, 7) == 3);
  CHECK(c(0, 8) == 4);
  CHECK(c(0, 0) == 0);
}

TEST_CASE("shape errors") {
  ag::Graph g(false);
  auto a = g.constant(Matrix::Zero(2, 3));
  auto b = g.constant(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(ag::matmul(g, a, a), latentforce::ShapeError);
  CHECK_THROWS_AS(ag::mul(g, a, b), latentforce::ShapeError);
  CHECK_THROWS_AS(ag::gather_rows(g, a, {5}), latentforce::ShapeError);
}

TEST_CASE("backward counts and frees") {
  std::mt19937_64 rng(6);
  ag::Parameter p{"p", lftest::random_matrix(2, 2, rng), {}, true};
  const auto before = ag::stats().backward_calls.load();
  ag::Graph g;
  std::vector<ag::Parameter*> ps = {&p};
  g.train(ps);
  p.zero_grad();
  g.backward(ag::sum_squares(g, g.param(p)));
  CHECK(ag::stats().backward_calls.load() == before + 1);
  CHECK((p.grad - 2 * p.value).norm() < 1e-12);
}

TEST_CASE("untrained parameters act as constants") {
  ag::Parameter p{"p", Matrix::Ones(2, 2), {}, true};
  ag::Parameter q{"q", Matrix::Ones(2, 2), {}, true};
  p.zero_grad();
  q.zero_grad();
  ag::Graph g;
  std::vector<ag::Parameter*> ps = {&p};
  g.train(ps);
  g.backward(ag::sum(g, ag::mul(g, g.param(p), g.param(q))));
  CHECK(p.grad.sum() == doctest::Approx(4.0));
  CHECK(q.grad.sum() == 0.0);
}
