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

#include "selfd/core/camera.hpp"

#include <cmath>

namespace selfd::core {

void to_json(nlohmann::json& j, const CameraSpec& c) {
  j = nlohmann::json{{"height_m", c.height_m},
                     {"pitch_deg", c.pitch_deg},
                     {"hfov_deg", c.hfov_deg},
                     {"width", c.width},
                     {"height", c.height}};
}

void from_json(const nlohmann::json& j, CameraSpec& c) {
  c.height_m = j.value("height_m", c.height_m);
  c.pitch_deg = j.value("pitch_deg", c.pitch_deg);
  c.hfov_deg = j.value("hfov_deg", c.hfov_deg);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
}

// Camera axes in the ego frame for pitch p (down positive):
//   forward = ( cos p, 0, -sin p)
//   down    = (-sin p, 0, -cos p)
//   right   = (0, -1, 0)

double CameraSpec::focal_px() const { return 0.5 * width / std::tan(0.5 * deg2rad(hfov_deg)); }

double CameraSpec::horizon_row() const { return cy() - focal_px() * std::tan(deg2rad(pitch_deg)); }

std::array<double, 3> CameraSpec::ray(Vec2 pixel) const {
  const double f = focal_px();
  const double a = (pixel.x - cx()) / f;
  const double b = (pixel.y - cy()) / f;
  const double p = deg2rad(pitch_deg);
  const double cp = std::cos(p), sp = std::sin(p);
  return {cp - b * sp, -a, -sp - b * cp};
}

std::optional<Vec2> CameraSpec::project_ground(Vec2 bev) const {
  const double p = deg2rad(pitch_deg);
  const double cp = std::cos(p), sp = std::sin(p);
  // Offset from the camera center to the ground point is (x, y, -h).
  const double fwd = bev.x * cp + height_m * sp;
  const double down = -bev.x * sp + height_m * cp;
  const double right = -bev.y;
  if (fwd <= 1e-6) return std::nullopt;
  const double f = focal_px();
  return Vec2{cx() + f * right / fwd, cy() + f * down / fwd};
}

std::optional<Vec2> CameraSpec::ground_from_pixel(Vec2 pixel) const {
  const auto d = ray(pixel);
  if (d[2] >= -1e-9) return std::nullopt;
  const double t = height_m / -d[2];
  return Vec2{t * d[0], t * d[1]};
}

bool CameraSpec::valid() const {
  return height_m > 0.0 && hfov_deg > 20.0 && hfov_deg < 120.0 && width > 0 && height > 0 &&
         std::abs(pitch_deg) < 45.0;
}

}  // namespace selfd::core
