// Copyright 2026 The selfd Authors
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

#include "selfd/sim/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace selfd::sim {

std::string_view appearance_name(Appearance a) {
  switch (a) {
    case Appearance::kDay: return "day";
    case Appearance::kDusk: return "dusk";
    case Appearance::kNight: return "night";
    case Appearance::kRain: return "rain";
  }
  return "?";
}

Appearance appearance_from_name(std::string_view name) {
  for (Appearance a : kAllAppearances) {
    if (appearance_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown appearance '" + std::string(name) + "'");
}

namespace {

using Rgb = std::array<double, 3>;

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

std::uint64_t hash2(std::int64_t a, std::int64_t b, std::uint64_t seed) {
  return core::mix_seed(core::mix_seed(seed, static_cast<std::uint64_t>(a)), static_cast<std::uint64_t>(b));
}

double hash_unit(std::int64_t a, std::int64_t b, std::uint64_t seed) {
  return static_cast<double>(hash2(a, b, seed) >> 11) * 0x1.0p-53;
}

constexpr Rgb kSkyHorizon = {0.78, 0.84, 0.92};
constexpr Rgb kSkyZenith = {0.40, 0.56, 0.86};
constexpr Rgb kRoad = {0.33, 0.33, 0.35};
constexpr Rgb kGrass = {0.27, 0.46, 0.22};
constexpr Rgb kCenterLine = {0.88, 0.78, 0.25};
constexpr Rgb kEdgeLine = {0.90, 0.90, 0.88};
constexpr std::array<Rgb, 6> kAgentColors = {{{0.75, 0.12, 0.10},
                                               {0.12, 0.25, 0.70},
                                               {0.85, 0.85, 0.82},
                                               {0.10, 0.10, 0.12},
                                               {0.85, 0.55, 0.10},
                                               {0.35, 0.55, 0.60}}};

struct AgentFrame {
  double ox, oy, oz;  // camera origin in agent frame
  double c, s;        // rotation world -> agent
  double hl, hw;
  int id;
};

struct Scene {
  const World& world;
  double cam_x, cam_y, cam_z;
  double cos_yaw, sin_yaw;
  std::vector<AgentFrame> agents;
  const RenderOptions& opt;
};

Rgb ground_color(const Scene& sc, double gx, double gy) {
  const core::Vec2 p{gx, gy};
  const RoadGrid& grid = sc.world.grid;
  const double off = grid.offroad_distance(p);
  if (off > 0.0) {
    // Grass with a 5 m checker and fine noise.
    const auto cx = static_cast<std::int64_t>(std::floor(gx / 5.0));
    const auto cy = static_cast<std::int64_t>(std::floor(gy / 5.0));
    const double shade = ((cx + cy) & 1) ? 0.05 : -0.03;
    const double n = 0.04 * (hash_unit(cx, cy, 0x9e37) - 0.5);
    return {kGrass[0] + shade + n, kGrass[1] + shade + n, kGrass[2] + shade * 0.5 + n};
  }
  const auto tx = static_cast<std::int64_t>(std::floor(gx * 2.0));
  const auto ty = static_cast<std::int64_t>(std::floor(gy * 2.0));
  const double n = 0.03 * (hash_unit(tx, ty, 0x51ed) - 0.5);
  Rgb c{kRoad[0] + n, kRoad[1] + n, kRoad[2] + n};
  if (auto m = grid.marking_coords(p)) {
    const double lat = std::abs(m->lateral);
    const double along = m->along - 6.0 * std::floor(m->along / 6.0);
    if (lat < 0.12 && along < 3.0) c = kCenterLine;
    const double edge = grid.half_width - 0.3;
    if (lat > edge - 0.08 && lat < edge + 0.08) c = kEdgeLine;
  }
  return c;
}

Rgb trace(const Scene& sc, const std::array<double, 3>& d_ego, bool& hit_ground, double& dist) {
  // Ray direction in world axes (x, y horizontal, z up).
  const double dx = sc.cos_yaw * d_ego[0] - sc.sin_yaw * d_ego[1];
  const double dy = sc.sin_yaw * d_ego[0] + sc.cos_yaw * d_ego[1];
  const double dz = d_ego[2];

  double t_best = std::numeric_limits<double>::infinity();
  Rgb color{};
  if (dz < 0.0) {
    t_best = sc.cam_z / -dz;
    color = ground_color(sc, sc.cam_x + t_best * dx, sc.cam_y + t_best * dy);
    hit_ground = true;
  }
  for (const auto& a : sc.agents) {
    const double lx = a.c * dx + a.s * dy;
    const double ly = -a.s * dx + a.c * dy;
    const double lo[3] = {a.ox, a.oy, a.oz};
    const double ld[3] = {lx, ly, dz};
    const double bmin[3] = {-a.hl, -a.hw, 0.0};
    const double bmax[3] = {a.hl, a.hw, sc.opt.agent_height_m};
    double t0 = 0.0, t1 = t_best;
    int face = -1;
    bool miss = false;
    for (int ax = 0; ax < 3 && !miss; ++ax) {
      if (std::abs(ld[ax]) < 1e-12) {
        if (lo[ax] < bmin[ax] || lo[ax] > bmax[ax]) miss = true;
        continue;
      }
      double ta = (bmin[ax] - lo[ax]) / ld[ax];
      double tb = (bmax[ax] - lo[ax]) / ld[ax];
      if (ta > tb) std::swap(ta, tb);
      if (ta > t0) {
        t0 = ta;
        face = ax;
      }
      t1 = std::min(t1, tb);
      if (t0 > t1) miss = true;
    }
    if (miss || face < 0 || t0 >= t_best) continue;
    t_best = t0;
    hit_ground = false;
    const Rgb& base = kAgentColors[static_cast<std::size_t>(a.id) % kAgentColors.size()];
    const double shade = face == 2 ? 1.1 : (face == 0 ? 0.85 : 0.7);
    // Dark window band on the upper half of the sides.
    const double z = a.oz + t0 * dz;
    const bool window = face != 2 && z > 0.9 && z < 1.35;
    color = window ? Rgb{0.12, 0.14, 0.18} : Rgb{base[0] * shade, base[1] * shade, base[2] * shade};
  }
  if (!std::isfinite(t_best)) {
    const double elev = std::clamp(dz / std::sqrt(dx * dx + dy * dy + dz * dz), 0.0, 1.0);
    dist = std::numeric_limits<double>::infinity();
    return mix(kSkyHorizon, kSkyZenith, std::sqrt(elev));
  }
  dist = t_best * std::sqrt(dx * dx + dy * dy + dz * dz);
  if (sc.opt.haze) color = mix(color, kSkyHorizon, 1.0 - std::exp(-dist / sc.opt.haze_distance_m));
  return color;
}

struct Look {
  double brightness;
  Rgb tint;
  double contrast;  // blend toward mid gray
  double saturation;
  double noise;
  bool headlights;
};

Look look_for(Appearance a) {
  switch (a) {
    case Appearance::kDay: return {1.0, {1.0, 1.0, 1.0}, 1.0, 1.0, 0.012, false};
    case Appearance::kDusk: return {0.68, {1.12, 0.86, 0.70}, 0.9, 0.9, 0.02, false};
    case Appearance::kNight: return {0.28, {0.80, 0.86, 1.12}, 1.0, 0.7, 0.025, true};
    case Appearance::kRain: return {0.80, {0.92, 0.96, 1.02}, 0.6, 0.55, 0.045, false};
  }
  return {1.0, {1.0, 1.0, 1.0}, 1.0, 1.0, 0.0, false};
}

}  // namespace

core::Image render(const World& world, const core::Pose2& ego, double t, const core::CameraSpec& camera,
                   Appearance appearance, std::uint64_t noise_seed, const RenderOptions& options) {
  if (!camera.valid()) throw std::invalid_argument("invalid camera spec");
  if (options.supersample < 1) throw std::invalid_argument("supersample must be positive");
  Scene sc{world, ego.x, ego.y, camera.height_m, std::cos(ego.yaw), std::sin(ego.yaw), {}, options};
  for (const auto& a : world.agents_at(t)) {
    const double rx = sc.cam_x - a.rect.center.x, ry = sc.cam_y - a.rect.center.y;
    if (std::hypot(rx, ry) > 150.0) continue;
    AgentFrame f;
    f.c = std::cos(a.rect.center.yaw);
    f.s = std::sin(a.rect.center.yaw);
    f.ox = f.c * rx + f.s * ry;
    f.oy = -f.s * rx + f.c * ry;
    f.oz = sc.cam_z;
    f.hl = a.rect.half_length;
    f.hw = a.rect.half_width;
    f.id = a.id;
    sc.agents.push_back(f);
  }

  const Look look = look_for(appearance);
  const int ss = options.supersample;
  core::Image img(camera.width, camera.height);
  for (int i = 0; i < camera.height; ++i) {
    for (int j = 0; j < camera.width; ++j) {
      Rgb acc{0.0, 0.0, 0.0};
      for (int a = 0; a < ss; ++a) {
        for (int b = 0; b < ss; ++b) {
          const core::Vec2 px{j + (b + 0.5) / ss, i + (a + 0.5) / ss};
          bool ground = false;
          double dist = 0.0;
          Rgb c = trace(sc, camera.ray(px), ground, dist);
          double gain = look.brightness;
          if (look.headlights) {
            if (ground || std::isfinite(dist)) {
              const double lateral = std::abs(px.x - camera.cx()) / camera.focal_px();
              const double beam = std::exp(-dist / 14.0 - (lateral / 0.4) * (lateral / 0.4));
              gain *= 1.0 + 2.2 * beam;
            }
          }
          for (int ch = 0; ch < 3; ++ch) acc[ch] += gain * c[ch] * look.tint[ch];
        }
      }
      const double inv = 1.0 / (ss * ss);
      Rgb c{acc[0] * inv, acc[1] * inv, acc[2] * inv};
      const double gray = (c[0] + c[1] + c[2]) / 3.0;
      const double mid = 0.5 * look.brightness;
      for (int ch = 0; ch < 3; ++ch) {
        double v = gray + look.saturation * (c[ch] - gray);
        v = mid + look.contrast * (v - mid);
        v += look.noise * (2.0 * hash_unit(i * 4096 + j, ch, noise_seed) - 1.0);
        img.at(i, j, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  core::quantize(img);
  return img;
}

}  // namespace selfd::sim
