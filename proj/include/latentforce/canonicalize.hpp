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

#include <string>
#include <vector>

#include "latentforce/image.hpp"
#include "latentforce/sensor_sim.hpp"

namespace latentforce {

class Config;

constexpr int kStorageWidth = 640;
constexpr int kStorageHeight = 480;
constexpr std::uint8_t kForeground = 255;

/// Binary marker image: every pixel is 0 (background) or 255 (marker).
struct MarkerImage {
  Image8 image;
  std::string sensor_id;

  int width() const { return image.width; }
  int height() const { return image.height; }

  friend bool operator==(const MarkerImage&, const MarkerImage&) = default;
};

/// <reference, contact> pair; the model input x.
struct TactileObservation {
  MarkerImage ref;
  MarkerImage cur;
  bool mirrored = false;
};

struct TaxelRenderOptions {
  double k_xy = 26.0;  // px per signal unit
  double k_z = 20.0;   // px of radius per unit of dz
  double r_min = 8.0;
  double r_max = 60.0;

  static TaxelRenderOptions from_config(const Config& config);
};

/// Blobs smaller than this are treated as noise and dropped.
constexpr int kMinBlobArea = 4;

/// Threshold at mid-gray plus connected-component cleanup. Markers are the
/// minority phase: on a light background dark pixels become foreground, on a
/// dark background (an already-binary image) bright pixels do, which makes the
/// operation idempotent.
MarkerImage segment_markers(const Image8& raw, const std::string& sensor_id = {});

/// Number of 8-connected foreground components.
int count_components(const Image8& binary);

MarkerImage taxels_to_markers(const TaxelSignal& signal, const SensorProfile& profile,
                              const TaxelRenderOptions& options = {});

MarkerImage mirror_horizontal(const MarkerImage& img);

MarkerImage resize_nearest(const MarkerImage& img, int width, int height);

/// Nearest-neighbour resize of both frames to `size` x `size`.
TactileObservation to_model_input(const TactileObservation& obs, int size);

/// Raw sensor signal -> canonical binary marker image at storage size,
/// mirrored when the profile sits on the right finger.
MarkerImage canonicalize(const RawSignal& raw, const SensorProfile& profile,
                         const TaxelRenderOptions& options = {});

/// Canonical image of the undeformed sensor.
MarkerImage reference_marker_image(const SensorProfile& profile,
                                   const TaxelRenderOptions& options = {});

bool is_binary(const Image8& img);

}  // namespace latentforce
