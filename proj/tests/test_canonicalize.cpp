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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <variant>
#include <vector>

#include "doctest.h"
#include "latentforce/canonicalize.hpp"
#include "latentforce/errors.hpp"
#include "latentforce/sensor_sim.hpp"

using namespace latentforce;

namespace {

struct Blob {
  double cx = 0;
  double cy = 0;
  int area = 0;
};

// Union-find labelling with 8-connectivity, independent of the library's
// flood fill.
std::vector<Blob> blobs(const Image8& img) {
  const int w = img.width;
  const int n = w * img.height;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!img.at(x, y)) continue;
      const int self = y * w + x;
      const int nb[4][2] = {{-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
      for (auto [dx, dy] : nb) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || !img.at(nx, ny)) continue;
        parent[find(self)] = find(ny * w + nx);
      }
    }
  }
  std::vector<int> index(n, -1);
  std::vector<Blob> out;
  for (int i = 0; i < n; ++i) {
    if (!img.pixels[i]) continue;
    const int r = find(i);
    if (index[r] < 0) {
      index[r] = static_cast<int>(out.size());
      out.push_back({});
    }
    Blob& b = out[index[r]];
    b.cx += i % w + 0.5;
    b.cy += i / w + 0.5;
    ++b.area;
  }
  for (Blob& b : out) {
    b.cx /= b.area;
    b.cy /= b.area;
  }
  return out;
}

const Blob& nearest(const std::vector<Blob>& bs, double x, double y) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < bs.size(); ++i) {
    if (std::hypot(bs[i].cx - x, bs[i].cy - y) < std::hypot(bs[best].cx - x, bs[best].cy - y)) {
      best = i;
    }
  }
  return bs[best];
}

TaxelSignal zero_taxels() {
  TaxelSignal s;
  s.values.assign(16, {0, 0, 0});
  return s;
}

}  // namespace

TEST_CASE("segmentation recovers every rendered disc") {
  for (SensorKind kind : {SensorKind::kGridVision, SensorKind::kPinVision}) {
    const SensorProfile p = make_profile(kind, Side::kLeft, 5);
    ContactState c;
    c.wrench = {0.8, 0.3, 5.0, 0, 0, 0};
    const RawSignal raw = render_frame(p, displacement_field(p, c), &c);
    const MarkerImage seg = segment_markers(std::get<Image8>(raw));
    CHECK(is_binary(seg.image));
    CHECK(blobs(seg.image).size() == p.marker_positions.size());
    CHECK(count_components(seg.image) == static_cast<int>(p.marker_positions.size()));
  }
}

TEST_CASE("uniform and empty images segment to background") {
  const MarkerImage a = segment_markers(Image8(64, 48, 210));
  CHECK(std::all_of(a.image.pixels.begin(), a.image.pixels.end(), [](auto v) { return v == 0; }));
  const MarkerImage b = segment_markers(Image8());
  CHECK(b.image.empty());
}

TEST_CASE("segmentation is idempotent and commutes with mirroring") {
  const SensorProfile p = make_profile(SensorKind::kPinVision, Side::kLeft, 1);
  ContactState c;
  c.wrench = {-1.0, 0.5, 8.0, 0, 0, 0};
  c.center = {2.0, -1.0};
  Image8 raw = std::get<Image8>(render_frame(p, displacement_field(p, c), &c));
  const MarkerImage once = segment_markers(raw);
  CHECK(segment_markers(once.image) == once);

  MarkerImage raw_img;
  raw_img.image = raw;
  CHECK(segment_markers(mirror_horizontal(raw_img).image) == mirror_horizontal(once));
}

TEST_CASE("mirror_horizontal index arithmetic") {
  MarkerImage img;
  img.image = Image8(640, 480);
  img.image.at(10, 7) = 255;
  const MarkerImage m = mirror_horizontal(img);
  CHECK(m.image.at(629, 7) == 255);
  CHECK(std::count(m.image.pixels.begin(), m.image.pixels.end(), 255) == 1);
  CHECK(mirror_horizontal(m) == img);

  MarkerImage sym;
  sym.image = Image8(8, 2);
  sym.image.at(1, 0) = sym.image.at(6, 0) = 255;
  CHECK(mirror_horizontal(sym) == sym);
}

TEST_CASE("taxel rendering: rest, shift and growth") {
  const SensorProfile p = make_profile(SensorKind::kTaxelArray, Side::kLeft, 0);
  TaxelRenderOptions opt;

  CHECK(taxels_to_markers(zero_taxels(), p, opt) == reference_marker_image(p, opt));

  const Vec2 q0 = p.to_pixels(p.marker_positions[0]);
  const auto rest = blobs(taxels_to_markers(zero_taxels(), p, opt).image);
  REQUIRE(rest.size() == 16);

  opt.k_xy = 5;
  TaxelSignal s = zero_taxels();
  s.values[0][0] = 2.0;
  const auto shifted = blobs(taxels_to_markers(s, p, opt).image);
  REQUIRE(shifted.size() == 16);
  const Blob& before = nearest(rest, q0.x, q0.y);
  const Blob& after = nearest(shifted, q0.x + 10, q0.y);
  CHECK(after.cx - before.cx == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(after.cy == doctest::Approx(before.cy).epsilon(1e-9));
  CHECK(after.area == before.area);

  // Uniform dz grows every radius by k_z * dz; area scales with r^2.
  TaxelSignal grow = zero_taxels();
  for (auto& v : grow.values) v[2] = 0.2;
  opt = TaxelRenderOptions{};
  const auto grown = blobs(taxels_to_markers(grow, p, opt).image);
  const double r0 = p.marker_radius;
  const double r1 = r0 + opt.k_z * 0.2;
  const Blob& g0 = nearest(grown, q0.x, q0.y);
  CHECK(std::sqrt(g0.area / M_PI) == doctest::Approx(r1).epsilon(0.02));
  CHECK(std::sqrt(before.area / M_PI) == doctest::Approx(r0).epsilon(0.02));

  TaxelSignal bad;
  bad.values.assign(15, {0, 0, 0});
  CHECK_THROWS_AS(taxels_to_markers(bad, p, opt), ShapeError);
}

TEST_CASE("to_model_input keeps binarity and shape") {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution on(0.3);
  TactileObservation obs;
  obs.ref.image = Image8(640, 480);
  obs.cur.image = Image8(640, 480);
  for (auto& v : obs.cur.image.pixels) v = on(rng) ? 255 : 0;
  const TactileObservation out = to_model_input(obs, 224);
  CHECK(out.ref.width() == 224);
  CHECK(out.ref.height() == 224);
  CHECK(out.cur.width() == 224);
  CHECK(is_binary(out.cur.image));
  CHECK(std::all_of(out.ref.image.pixels.begin(), out.ref.image.pixels.end(),
                    [](auto v) { return v == 0; }));
}

TEST_CASE("right-finger canonical images are mirrored") {
  const SensorProfile l = make_profile(SensorKind::kGridVision, Side::kLeft, 2);
  SensorProfile r = l;
  r.side = Side::kRight;
  const RawSignal raw = reference_signal(l);
  CHECK(canonicalize(raw, r) == mirror_horizontal(canonicalize(raw, l)));
}
