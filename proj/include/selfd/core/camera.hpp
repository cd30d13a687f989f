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

#include <array>
#include <nlohmann/json.hpp>
#include <optional>

#include "selfd/core/geometry.hpp"

namespace selfd::core {

/// Forward-looking pinhole camera mounted at the ego origin.
///
/// Pitch is positive when the camera tilts down. Pixel coordinates are continuous with
/// pixel (i, j) covering [j, j+1) x [i, i+1); the principal point is the image center.
struct CameraSpec {
  double height_m = 1.7;
  double pitch_deg = 0.0;
  double hfov_deg = 70.0;
  int width = 128;
  int height = 72;

  double focal_px() const;
  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }

  /// Row (continuous, from the top) of the horizon line.
  double horizon_row() const;

  /// Unit-free ray direction in the ego frame (x forward, y left, z up) through a pixel.
  std::array<double, 3> ray(Vec2 pixel) const;

  /// Pixel of a ground point in BEV meters, or nullopt when it lies behind the image plane.
  std::optional<Vec2> project_ground(Vec2 bev) const;

  /// Ground intersection of a pixel ray, or nullopt at/above the horizon.
  std::optional<Vec2> ground_from_pixel(Vec2 pixel) const;

  bool valid() const;
  friend bool operator==(const CameraSpec&, const CameraSpec&) = default;
};

void to_json(nlohmann::json& j, const CameraSpec& c);
void from_json(const nlohmann::json& j, CameraSpec& c);

}  // namespace selfd::core
