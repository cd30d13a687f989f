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

#include "selfd/core/geometry.hpp"

#include <algorithm>
#include <array>

namespace selfd::core {
namespace {

std::array<Vec2, 4> corners(const OrientedRect& r) {
  const Vec2 c = r.center.position();
  const Vec2 ax = rotate({r.half_length, 0.0}, r.center.yaw);
  const Vec2 ay = rotate({0.0, r.half_width}, r.center.yaw);
  return {c + ax + ay, c + ax - ay, c - ax - ay, c - ax + ay};
}

bool separated_on(Vec2 axis, const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  double amin = dot(axis, a[0]), amax = amin;
  double bmin = dot(axis, b[0]), bmax = bmin;
  for (int i = 1; i < 4; ++i) {
    amin = std::min(amin, dot(axis, a[i]));
    amax = std::max(amax, dot(axis, a[i]));
    bmin = std::min(bmin, dot(axis, b[i]));
    bmax = std::max(bmax, dot(axis, b[i]));
  }
  return amax < bmin || bmax < amin;
}

}  // namespace

bool overlaps(const OrientedRect& a, const OrientedRect& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  const Vec2 axes[4] = {rotate({1, 0}, a.center.yaw), rotate({0, 1}, a.center.yaw), rotate({1, 0}, b.center.yaw),
                        rotate({0, 1}, b.center.yaw)};
  for (const Vec2& axis : axes) {
    if (separated_on(axis, ca, cb)) return false;
  }
  return true;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace selfd::core
