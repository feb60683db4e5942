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

#include "latentforce/canonicalize.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "latentforce/config.hpp"
#include "latentforce/errors.hpp"

namespace latentforce {

TaxelRenderOptions TaxelRenderOptions::from_config(const Config& config) {
  TaxelRenderOptions o;
  o.k_xy = config.get_double("canon.taxel_k_xy");
  o.k_z = config.get_double("canon.taxel_k_z");
  o.r_min = config.get_double("canon.taxel_r_min");
  o.r_max = config.get_double("canon.taxel_r_max");
  if (o.r_min < 0 || o.r_max < o.r_min) {
    throw ConfigError("canon.taxel_r_min/canon.taxel_r_max must satisfy 0 <= min <= max");
  }
  return o;
}

namespace {

// Visits 8-connected foreground components; `fn` receives the pixel indices
// of each component.
template <typename Fn>
void for_each_component(const Image8& binary, std::vector<int>& stack,
                        std::vector<std::uint8_t>& seen, Fn&& fn) {
  const int w = binary.width;
  const int h = binary.height;
  seen.assign(binary.pixels.size(), 0);
  std::vector<int> members;
  for (int start = 0; start < w * h; ++start) {
    if (binary.pixels[start] == 0 || seen[start]) continue;
    members.clear();
    stack.clear();
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      members.push_back(idx);
      const int x = idx % w;
      const int y = idx / w;
      for (int dy = -1; dy <= 1; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= h) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          if (nx < 0 || nx >= w) continue;
          const int n = ny * w + nx;
          if (binary.pixels[n] != 0 && !seen[n]) {
            seen[n] = 1;
            stack.push_back(n);
          }
        }
      }
    }
    fn(members);
  }
}

}  // namespace

MarkerImage segment_markers(const Image8& raw, const std::string& sensor_id) {
  MarkerImage out;
  out.sensor_id = sensor_id;
  out.image = Image8(raw.width, raw.height);
  if (raw.empty()) return out;

  std::array<std::size_t, 256> hist{};
  for (auto v : raw.pixels) ++hist[v];
  std::size_t acc = 0;
  int median = 0;
  for (int v = 0; v < 256; ++v) {
    acc += hist[v];
    if (2 * acc >= raw.pixels.size()) {
      median = v;
      break;
    }
  }
  const bool light_background = median >= 128;
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    const bool dark = raw.pixels[i] < 128;
    out.image.pixels[i] = (dark == light_background) ? kForeground : 0;
  }

  std::vector<int> stack;
  std::vector<std::uint8_t> seen;
  Image8 mask = out.image;
  for_each_component(mask, stack, seen, [&](const std::vector<int>& members) {
    if (static_cast<int>(members.size()) < kMinBlobArea) {
      for (int idx : members) out.image.pixels[idx] = 0;
    }
  });
  return out;
}

int count_components(const Image8& binary) {
  std::vector<int> stack;
  std::vector<std::uint8_t> seen;
  int count = 0;
  for_each_component(binary, stack, seen, [&](const std::vector<int>&) { ++count; });
  return count;
}

namespace {

void fill_disc(Image8& img, double cx, double cy, double radius) {
  if (radius <= 0) return;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    const double py = y + 0.5 - cy;
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5 - cx;
      if (px * px + py * py <= r2) img.at(x, y) = kForeground;
    }
  }
}

}  // namespace

MarkerImage taxels_to_markers(const TaxelSignal& signal, const SensorProfile& profile,
                              const TaxelRenderOptions& options) {
  if (profile.kind != SensorKind::kTaxelArray) {
    throw ArgumentError("taxels_to_markers needs a taxel_array profile");
  }
  if (signal.values.size() != profile.marker_positions.size()) {
    throw ShapeError("taxel signal has " + std::to_string(signal.values.size()) +
                     " rows, profile has " + std::to_string(profile.marker_positions.size()) +
                     " taxels");
  }
  MarkerImage out;
  out.sensor_id = profile.sensor_id;
  out.image = Image8(profile.render_width, profile.render_height);
  for (std::size_t k = 0; k < signal.values.size(); ++k) {
    const Vec2 q = profile.to_pixels(profile.marker_positions[k]);
    const auto& s = signal.values[k];
    const double radius =
        std::clamp(profile.marker_radius + options.k_z * s[2], options.r_min, options.r_max);
    fill_disc(out.image, q.x + options.k_xy * s[0], q.y + options.k_xy * s[1], radius);
  }
  return out;
}

MarkerImage mirror_horizontal(const MarkerImage& img) {
  MarkerImage out = img;
  const int w = img.width();
  for (int y = 0; y < img.height(); ++y) {
    auto* row = out.image.pixels.data() + static_cast<std::size_t>(y) * w;
    std::reverse(row, row + w);
  }
  return out;
}

MarkerImage resize_nearest(const MarkerImage& img, int width, int height) {
  if (width <= 0 || height <= 0) throw ArgumentError("resize target must be positive");
  MarkerImage out;
  out.sensor_id = img.sensor_id;
  out.image = Image8(width, height);
  if (img.image.empty()) return out;
  std::vector<int> src_x(width);
  for (int x = 0; x < width; ++x) {
    src_x[x] = std::min(img.width() - 1,
                        static_cast<int>((x + 0.5) * img.width() / static_cast<double>(width)));
  }
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height() - 1,
                            static_cast<int>((y + 0.5) * img.height() / static_cast<double>(height)));
    for (int x = 0; x < width; ++x) out.image.at(x, y) = img.image.at(src_x[x], sy);
  }
  return out;
}

TactileObservation to_model_input(const TactileObservation& obs, int size) {
  if (obs.ref.width() != obs.cur.width() || obs.ref.height() != obs.cur.height()) {
    throw ShapeError("observation frames differ in size");
  }
  return {resize_nearest(obs.ref, size, size), resize_nearest(obs.cur, size, size),
          obs.mirrored};
}

MarkerImage canonicalize(const RawSignal& raw, const SensorProfile& profile,
                         const TaxelRenderOptions& options) {
  MarkerImage img;
  if (const auto* taxels = std::get_if<TaxelSignal>(&raw)) {
    img = taxels_to_markers(*taxels, profile, options);
  } else {
    img = segment_markers(std::get<Image8>(raw), profile.sensor_id);
  }
  return profile.side == Side::kRight ? mirror_horizontal(img) : img;
}

MarkerImage reference_marker_image(const SensorProfile& profile,
                                   const TaxelRenderOptions& options) {
  return canonicalize(reference_signal(profile), profile, options);
}

bool is_binary(const Image8& img) {
  return std::all_of(img.pixels.begin(), img.pixels.end(),
                     [](std::uint8_t v) { return v == 0 || v == kForeground; });
}

}  // namespace latentforce
