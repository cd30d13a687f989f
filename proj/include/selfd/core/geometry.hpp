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

#pragma once

#include <cmath>
#include <numbers>

namespace selfd::core {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;

  double norm() const { return std::hypot(x, y); }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a <= 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

inline constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Planar pose. Heading is measured counter-clockwise from the world x axis.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2&, const Pose2&) = default;
};

/// Expresses a world point in the ego frame of `ego` (x forward, y left).
inline Vec2 world_to_ego(const Pose2& ego, Vec2 p) {
  return rotate(p - ego.position(), -ego.yaw);
}

inline Vec2 ego_to_world(const Pose2& ego, Vec2 p) {
  return rotate(p, ego.yaw) + ego.position();
}

inline Pose2 world_to_ego(const Pose2& ego, const Pose2& p) {
  const Vec2 q = world_to_ego(ego, p.position());
  return {q.x, q.y, wrap_angle(p.yaw - ego.yaw)};
}

/// Rectangle with arbitrary orientation, described by its center pose and half extents.
struct OrientedRect {
  Pose2 center;
  double half_length = 0.0;
  double half_width = 0.0;

  friend bool operator==(const OrientedRect&, const OrientedRect&) = default;
};

/// Point containment with the rectangle grown by `inflate` on every side. Boundary counts as inside.
inline bool contains(const OrientedRect& r, Vec2 p, double inflate = 0.0) {
  const Vec2 local = world_to_ego(r.center, p);
  return std::abs(local.x) <= r.half_length + inflate && std::abs(local.y) <= r.half_width + inflate;
}

/// Separating-axis overlap test for two oriented rectangles.
bool overlaps(const OrientedRect& a, const OrientedRect& b);

/// Distance from `p` to the segment [a, b].
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

}  // namespace selfd::core
