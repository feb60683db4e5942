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
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "latentforce/image.hpp"

namespace latentforce {

class Config;

enum class SensorKind { kGridVision, kPinVision, kTaxelArray };
enum class Side { kLeft, kRight };

std::string to_string(SensorKind kind);
std::string to_string(Side side);
/// Throws ConfigError for anything but the three known kind names.
SensorKind parse_sensor_kind(const std::string& name);

struct Vec2 {
  double x = 0;
  double y = 0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Compliance of one virtual sensor kind, mm/N for the gains.
struct SensorGains {
  double shear = 0;
  double normal = 0;
  double torsion = 0;  // 1/(N*mm), acts on tau_z only
  double influence_radius = 0;  // mm
};

/// Built-in gains for a kind; pin_vision is the softest skin.
SensorGains default_gains(SensorKind kind);
SensorGains gains_from_config(const Config& config, SensorKind kind);

struct SensorProfile {
  std::string sensor_id;
  SensorKind kind = SensorKind::kGridVision;
  Side side = Side::kLeft;
  std::vector<Vec2> marker_positions;  // mm, inside active_area
  Vec2 active_area;                    // (width, height) mm
  double shear_gain = 0;               // g_s, mm/N
  double normal_gain = 0;              // g_n, mm/N
  double torsion_gain = 0;
  double influence_radius = 0;  // sigma_c, mm
  double marker_radius = 0;     // r0, px at render size
  int render_width = 640;
  int render_height = 480;

  Vec2 to_pixels(Vec2 mm) const {
    return {mm.x * render_width / active_area.x, mm.y * render_height / active_area.y};
  }

  friend bool operator==(const SensorProfile&, const SensorProfile&) = default;
};

/// Builds a profile. The seed drives a small manufacturing jitter of the
/// marker lattice (at most 3% of its pitch) and of the gains (at most 5%),
/// so the result is a pure function of (kind, side, seed, gains).
SensorProfile make_profile(SensorKind kind, Side side, std::uint64_t seed);
SensorProfile make_profile(SensorKind kind, Side side, std::uint64_t seed,
                           const SensorGains& gains);

/// (F_x, F_y, F_z, tau_x, tau_y, tau_z) in N and N*mm.
using Wrench = std::array<double, 6>;

struct ContactState {
  Wrench wrench{};
  Vec2 center;  // mm offset from the active-area center, canonical frame
  std::string indenter_id;

  friend bool operator==(const ContactState&, const ContactState&) = default;
};

/// Indenters are modelled as an influence-radius scale and a contact-center
/// offset. Ids of the form "indenter_<k>" map onto a fixed table; any other id
/// gets scale 1 and no offset.
struct IndenterShape {
  double sigma_scale = 1.0;
  Vec2 offset;
};
IndenterShape indenter_shape(const std::string& indenter_id);
std::string indenter_name(int index);

/// Checks F_z >= 0 and |F_x|, |F_y| <= F_z * friction_cap.
void validate_contact(const ContactState& contact, double friction_cap);

/// Expresses a canonical contact in the native frame of a sensor mounted on
/// `side`. The right finger's image x axis is mirrored, so x-coordinates flip
/// along with F_x and the torque pseudo-vector components tau_y and tau_z.
ContactState native_contact(const ContactState& canonical, Side side);

/// Gaussian-influence linear elastic surrogate: per-marker displacement in mm.
std::vector<Vec2> displacement_field(const SensorProfile& profile,
                                     const ContactState& contact);

constexpr double kRadialSmoothing = 0.1;  // epsilon_r, mm

struct TaxelSignal {
  // 16 x (dx, dy, dz), row-major by taxel.
  std::vector<std::array<double, 3>> values;
};

using RawSignal = std::variant<Image8, TaxelSignal>;

constexpr std::uint8_t kRenderBackground = 210;
constexpr std::uint8_t kRenderMarker = 30;

/// Vision kinds: light background with anti-aliased dark discs.
/// Taxel kind: (dx, dy, dz) per taxel, where dz comes from `contact`
/// (zero when no contact is supplied).
RawSignal render_frame(const SensorProfile& profile, const std::vector<Vec2>& displacements,
                       const ContactState* contact = nullptr);

/// The undeformed raw signal of a profile.
RawSignal reference_signal(const SensorProfile& profile);

/// Adds zero-mean Gaussian noise in place (gray levels or mm).
void add_noise(RawSignal& signal, double stddev, std::mt19937_64& rng);

struct SimOptions {
  double friction_cap = 0.4;
  double f_min = 0.2;
  double f_peak_min = 4.0;
  double f_peak_max = 12.0;
  double shear_max = 3.0;
  double torque_amplitude = 0.0;
  double noise_std = 0.0;

  static SimOptions from_config(const Config& config);
};

struct EpisodeFrame {
  ContactState contact;  // canonical, shared by both fingers
  RawSignal raw_left;
  RawSignal raw_right;  // native (unmirrored) right-finger signal
};

struct GraspEpisode {
  std::string episode_id;
  std::string indenter_id;
  std::uint64_t seed = 0;
  SensorProfile profile_left;
  SensorProfile profile_right;
  std::vector<EpisodeFrame> frames;
};

/// Streams the frames of one episode so long episodes need not be held in
/// memory. `generate_episode` is the collected form.
class EpisodeGenerator {
 public:
  EpisodeGenerator(SensorProfile left, SensorProfile right, std::string indenter_id,
                   int n_frames, std::uint64_t seed, SimOptions options = {});

  bool has_next() const { return next_ < n_frames_; }
  int n_frames() const { return n_frames_; }
  int position() const { return next_; }
  const SensorProfile& left() const { return left_; }
  const SensorProfile& right() const { return right_; }

  /// The contact trajectory alone, without rendering.
  const std::vector<ContactState>& contacts() const { return contacts_; }

  EpisodeFrame next();

 private:
  SensorProfile left_;
  SensorProfile right_;
  SimOptions options_;
  int n_frames_ = 0;
  int next_ = 0;
  std::vector<ContactState> contacts_;
  std::mt19937_64 noise_rng_;
};

GraspEpisode generate_episode(const SensorProfile& left, const SensorProfile& right,
                              const std::string& indenter_id, int n_frames,
                              std::uint64_t seed, const SimOptions& options = {});

}  // namespace latentforce
