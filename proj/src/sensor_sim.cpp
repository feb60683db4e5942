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

#include "latentforce/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "latentforce/config.hpp"
#include "latentforce/errors.hpp"

namespace latentforce {

std::string to_string(SensorKind kind) {
  switch (kind) {
    case SensorKind::kGridVision:
      return "grid_vision";
    case SensorKind::kPinVision:
      return "pin_vision";
    case SensorKind::kTaxelArray:
      return "taxel_array";
  }
  return "unknown";
}

std::string to_string(Side side) { return side == Side::kLeft ? "left" : "right"; }

SensorKind parse_sensor_kind(const std::string& name) {
  if (name == "grid_vision") return SensorKind::kGridVision;
  if (name == "pin_vision") return SensorKind::kPinVision;
  if (name == "taxel_array") return SensorKind::kTaxelArray;
  throw ConfigError("unknown sensor kind '" + name + "'");
}

SensorGains default_gains(SensorKind kind) {
  switch (kind) {
    case SensorKind::kGridVision:
      return {0.12, 0.08, 0.002, 5.0};
    case SensorKind::kPinVision:
      return {0.20, 0.15, 0.003, 7.0};
    case SensorKind::kTaxelArray:
      return {0.10, 0.08, 0.002, 6.0};
  }
  throw ConfigError("unknown sensor kind");
}

SensorGains gains_from_config(const Config& config, SensorKind kind) {
  const std::string prefix = "sim." + to_string(kind) + ".";
  SensorGains g;
  g.shear = config.get_double(prefix + "shear_gain");
  g.normal = config.get_double(prefix + "normal_gain");
  g.torsion = config.get_double(prefix + "torsion_gain");
  g.influence_radius = config.get_double(prefix + "influence_radius");
  if (!(g.shear > 0) || !(g.normal > 0) || !(g.influence_radius > 0) || g.torsion < 0) {
    throw ConfigError("gains under '" + prefix + "*' must be strictly positive");
  }
  return g;
}

namespace {

std::uint64_t kind_salt(SensorKind kind) {
  return 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(kind) + 1);
}

}  // namespace

SensorProfile make_profile(SensorKind kind, Side side, std::uint64_t seed) {
  return make_profile(kind, side, seed, default_gains(kind));
}

SensorProfile make_profile(SensorKind kind, Side side, std::uint64_t seed,
                           const SensorGains& gains) {
  SensorProfile p;
  p.kind = kind;
  p.side = side;
  p.sensor_id = to_string(kind);

  Vec2 pitch;
  switch (kind) {
    case SensorKind::kGridVision: {
      // 10 columns x 8 rows over a 25 x 25 mm gel.
      p.active_area = {25.0, 25.0};
      pitch = {2.5, 25.0 / 8.0};
      for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 10; ++c) {
          p.marker_positions.push_back({(c + 0.5) * pitch.x, (r + 0.5) * pitch.y});
        }
      }
      p.marker_radius = 14.0;
      break;
    }
    case SensorKind::kPinVision: {
      // Six hexagonal rings around a centre pin: 1 + 6 * (1 + ... + 6) = 127.
      p.active_area = {40.0, 40.0};
      const double a = 3.0;
      pitch = {a, a};
      const int rings = 6;
      for (int r = -rings; r <= rings; ++r) {
        for (int q = -rings; q <= rings; ++q) {
          if (std::abs(q + r) > rings) continue;
          p.marker_positions.push_back(
              {20.0 + a * (q + 0.5 * r), 20.0 + a * std::numbers::sqrt3 / 2.0 * r});
        }
      }
      p.marker_radius = 10.0;
      break;
    }
    case SensorKind::kTaxelArray: {
      p.active_area = {24.6, 22.6};
      pitch = {24.6 / 4.0, 22.6 / 4.0};
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
          p.marker_positions.push_back({(c + 0.5) * pitch.x, (r + 0.5) * pitch.y});
        }
      }
      p.marker_radius = 24.0;
      break;
    }
  }

  p.shear_gain = gains.shear;
  p.normal_gain = gains.normal;
  p.torsion_gain = gains.torsion;
  p.influence_radius = gains.influence_radius;

  // Seed 0 is the nominal sensor.
  if (seed != 0) {
    std::mt19937_64 rng(seed ^ kind_salt(kind));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (auto& m : p.marker_positions) {
      m.x += 0.03 * pitch.x * unit(rng);
      m.y += 0.03 * pitch.y * unit(rng);
    }
    p.shear_gain *= 1.0 + 0.05 * unit(rng);
    p.normal_gain *= 1.0 + 0.05 * unit(rng);
    p.torsion_gain *= 1.0 + 0.05 * unit(rng);
    p.influence_radius *= 1.0 + 0.05 * unit(rng);
  }
  return p;
}

IndenterShape indenter_shape(const std::string& indenter_id) {
  const std::string prefix = "indenter_";
  IndenterShape shape;
  if (indenter_id.rfind(prefix, 0) != 0) return shape;
  int k = 0;
  try {
    k = std::stoi(indenter_id.substr(prefix.size()));
  } catch (const std::exception&) {
    return shape;
  }
  // Golden-angle spread of scales and offsets; indenter_0 is centred.
  const double golden = 0.6180339887498949;
  double frac = std::fmod(k * golden, 1.0);
  shape.sigma_scale = 0.7 + 0.6 * frac;
  const double radius = 0.8 * (k % 4);
  const double angle = 2.399963229728653 * k;
  shape.offset = {radius * std::cos(angle), radius * std::sin(angle)};
  return shape;
}

std::string indenter_name(int index) { return "indenter_" + std::to_string(index); }

void validate_contact(const ContactState& contact, double friction_cap) {
  const auto& w = contact.wrench;
  if (!(w[2] >= 0)) throw ArgumentError("contact normal force must be >= 0");
  const double cap = w[2] * friction_cap + 1e-12;
  if (std::abs(w[0]) > cap || std::abs(w[1]) > cap) {
    throw ArgumentError("tangential force exceeds the friction cap");
  }
}

ContactState native_contact(const ContactState& canonical, Side side) {
  if (side == Side::kLeft) return canonical;
  ContactState c = canonical;
  c.center.x = -c.center.x;
  c.wrench[0] = -c.wrench[0];
  c.wrench[4] = -c.wrench[4];
  c.wrench[5] = -c.wrench[5];
  return c;
}

std::vector<Vec2> displacement_field(const SensorProfile& profile,
                                     const ContactState& contact) {
  const auto& w = contact.wrench;
  const double sigma = profile.influence_radius * indenter_shape(contact.indenter_id).sigma_scale;
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const Vec2 c{profile.active_area.x / 2.0 + contact.center.x,
               profile.active_area.y / 2.0 + contact.center.y};

  std::vector<Vec2> u;
  u.reserve(profile.marker_positions.size());
  for (const auto& p : profile.marker_positions) {
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    const double d2 = dx * dx + dy * dy;
    const double d = std::sqrt(d2);
    const double g = std::exp(-d2 * inv_two_sigma2);
    const double radial = profile.normal_gain * w[2] / (d + kRadialSmoothing) * g;
    const double shear = profile.shear_gain * g;
    const double twist = profile.torsion_gain * w[5] * g;
    u.push_back({shear * w[0] + radial * dx - twist * dy,
                 shear * w[1] + radial * dy + twist * dx});
  }
  return u;
}

namespace {

void draw_disc(Image8& img, Vec2 center, double radius) {
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - radius - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(center.x + radius + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - radius - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(center.y + radius + 1)));
  for (int y = y0; y <= y1; ++y) {
    const double py = y + 0.5 - center.y;
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5 - center.x;
      const double coverage = std::clamp(radius + 0.5 - std::sqrt(px * px + py * py), 0.0, 1.0);
      if (coverage <= 0) continue;
      const double v = kRenderBackground + coverage * (kRenderMarker - kRenderBackground);
      const auto q = static_cast<std::uint8_t>(std::lround(v));
      img.at(x, y) = std::min(img.at(x, y), q);
    }
  }
}

}  // namespace

RawSignal render_frame(const SensorProfile& profile, const std::vector<Vec2>& displacements,
                       const ContactState* contact) {
  if (displacements.size() != profile.marker_positions.size()) {
    throw ShapeError("render_frame: " + std::to_string(displacements.size()) +
                     " displacements for " + std::to_string(profile.marker_positions.size()) +
                     " markers");
  }
  if (profile.kind == SensorKind::kTaxelArray) {
    TaxelSignal sig;
    sig.values.resize(profile.marker_positions.size());
    double sigma = profile.influence_radius;
    Vec2 c{profile.active_area.x / 2.0, profile.active_area.y / 2.0};
    double fz = 0;
    if (contact != nullptr) {
      sigma *= indenter_shape(contact->indenter_id).sigma_scale;
      c.x += contact->center.x;
      c.y += contact->center.y;
      fz = contact->wrench[2];
    }
    for (std::size_t k = 0; k < sig.values.size(); ++k) {
      const auto& p = profile.marker_positions[k];
      const double d2 = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
      const double dz = profile.normal_gain * fz * std::exp(-d2 / (2.0 * sigma * sigma));
      sig.values[k] = {displacements[k].x, displacements[k].y, dz};
    }
    return sig;
  }

  Image8 img(profile.render_width, profile.render_height, kRenderBackground);
  for (std::size_t k = 0; k < displacements.size(); ++k) {
    const auto& p = profile.marker_positions[k];
    draw_disc(img, profile.to_pixels({p.x + displacements[k].x, p.y + displacements[k].y}),
              profile.marker_radius);
  }
  return img;
}

RawSignal reference_signal(const SensorProfile& profile) {
  return render_frame(profile, std::vector<Vec2>(profile.marker_positions.size()));
}

void add_noise(RawSignal& signal, double stddev, std::mt19937_64& rng) {
  if (stddev <= 0) return;
  std::normal_distribution<double> noise(0.0, stddev);
  if (auto* img = std::get_if<Image8>(&signal)) {
    for (auto& px : img->pixels) {
      px = static_cast<std::uint8_t>(std::clamp(std::lround(px + noise(rng)), 0L, 255L));
    }
  } else {
    for (auto& v : std::get<TaxelSignal>(signal).values) {
      for (auto& c : v) c += noise(rng);
    }
  }
}

SimOptions SimOptions::from_config(const Config& config) {
  SimOptions o;
  o.friction_cap = config.get_double("sim.friction_cap");
  o.f_min = config.get_double("sim.f_min");
  o.f_peak_min = config.get_double("sim.f_peak_min");
  o.f_peak_max = config.get_double("sim.f_peak_max");
  o.shear_max = config.get_double("sim.shear_max");
  o.torque_amplitude = config.get_double("sim.torque_amplitude");
  o.noise_std = config.get_double("sim.noise_std");
  if (o.friction_cap < 0 || o.f_min < 0 || o.f_peak_max < o.f_peak_min || o.shear_max < 0 ||
      o.noise_std < 0 || o.torque_amplitude < 0) {
    throw ConfigError("inconsistent sim.* force settings");
  }
  return o;
}

namespace {

// AR(1) process with unit stationary deviation and a correlation time of
// about 1 / (1 - alpha) frames.
class SmoothWalk {
 public:
  explicit SmoothWalk(double alpha) : alpha_(alpha), beta_(std::sqrt(1.0 - alpha * alpha)) {}
  double step(std::mt19937_64& rng) {
    state_ = alpha_ * state_ + beta_ * normal_(rng);
    return state_;
  }

 private:
  double alpha_;
  double beta_;
  double state_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace

EpisodeGenerator::EpisodeGenerator(SensorProfile left, SensorProfile right,
                                   std::string indenter_id, int n_frames, std::uint64_t seed,
                                   SimOptions options)
    : left_(std::move(left)),
      right_(std::move(right)),
      options_(options),
      n_frames_(n_frames),
      noise_rng_(seed ^ 0xD1B54A32D192ED03ULL) {
  if (n_frames < 2) throw ArgumentError("an episode needs at least 2 frames");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double peak = std::max(options_.f_min, options_.f_peak_min +
                                                   (options_.f_peak_max - options_.f_peak_min) *
                                                       unit(rng));
  const IndenterShape shape = indenter_shape(indenter_id);
  const Vec2 base{shape.offset.x + 0.5 * (2 * unit(rng) - 1),
                  shape.offset.y + 0.5 * (2 * unit(rng) - 1)};
  // Rate of the slow normal-force wobble superimposed on the ramp.
  const double wobble_cycles = 1.0 + 2.0 * unit(rng);
  const double wobble_phase = 2.0 * std::numbers::pi * unit(rng);

  SmoothWalk shear_x(0.995), shear_y(0.995), torque_x(0.99), torque_y(0.99), torque_z(0.99);
  const double shear_scale = 0.7 * options_.shear_max;
  double jitter_x = 0, jitter_y = 0;

  contacts_.reserve(n_frames);
  for (int k = 0; k < n_frames; ++k) {
    const double s = static_cast<double>(k) / (n_frames - 1);
    ContactState c;
    c.indenter_id = indenter_id;
    const double wobble = 0.05 * (peak - options_.f_min) * s * (1.0 - s) * 4.0 *
                          std::sin(2.0 * std::numbers::pi * wobble_cycles * s + wobble_phase);
    double fz = options_.f_min + (peak - options_.f_min) * s + wobble;
    fz = std::max(options_.f_min, fz);

    const double wx = shear_x.step(rng);
    const double wy = shear_y.step(rng);
    const double tx = torque_x.step(rng);
    const double ty = torque_y.step(rng);
    const double tz = torque_z.step(rng);
    jitter_x = 0.9 * jitter_x + 0.02 * normal(rng);
    jitter_y = 0.9 * jitter_y + 0.02 * normal(rng);

    if (k == 0) {
      c.wrench = {0, 0, options_.f_min, 0, 0, 0};
    } else {
      const double cap = std::min(options_.shear_max, options_.friction_cap * fz);
      c.wrench = {std::clamp(shear_scale * wx, -cap, cap),
                  std::clamp(shear_scale * wy, -cap, cap),
                  fz,
                  options_.torque_amplitude * tx,
                  options_.torque_amplitude * ty,
                  options_.torque_amplitude * tz};
    }
    c.center = {base.x + jitter_x, base.y + jitter_y};
    contacts_.push_back(std::move(c));
  }
}

EpisodeFrame EpisodeGenerator::next() {
  if (!has_next()) throw ContractError("episode generator exhausted");
  EpisodeFrame frame;
  frame.contact = contacts_[next_++];

  const ContactState native_l = native_contact(frame.contact, left_.side);
  const ContactState native_r = native_contact(frame.contact, right_.side);
  frame.raw_left = render_frame(left_, displacement_field(left_, native_l), &native_l);
  frame.raw_right = render_frame(right_, displacement_field(right_, native_r), &native_r);
  add_noise(frame.raw_left, options_.noise_std, noise_rng_);
  add_noise(frame.raw_right, options_.noise_std, noise_rng_);
  return frame;
}

GraspEpisode generate_episode(const SensorProfile& left, const SensorProfile& right,
                              const std::string& indenter_id, int n_frames, std::uint64_t seed,
                              const SimOptions& options) {
  EpisodeGenerator gen(left, right, indenter_id, n_frames, seed, options);
  GraspEpisode ep;
  ep.episode_id = indenter_id + "_s" + std::to_string(seed);
  ep.indenter_id = indenter_id;
  ep.seed = seed;
  ep.profile_left = left;
  ep.profile_right = right;
  ep.frames.reserve(n_frames);
  while (gen.has_next()) ep.frames.push_back(gen.next());
  return ep;
}

}  // namespace latentforce
