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

#include "selfd/sim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace selfd::sim {

void to_json(nlohmann::json& j, const VehicleParams& p) {
  j = nlohmann::json{{"wheelbase_m", p.wheelbase_m}, {"max_steer_deg", p.max_steer_deg}, {"max_accel", p.max_accel},
                     {"max_brake", p.max_brake},     {"drag", p.drag},                   {"length_m", p.length_m},
                     {"width_m", p.width_m}};
}

void from_json(const nlohmann::json& j, VehicleParams& p) {
  p.wheelbase_m = j.value("wheelbase_m", p.wheelbase_m);
  p.max_steer_deg = j.value("max_steer_deg", p.max_steer_deg);
  p.max_accel = j.value("max_accel", p.max_accel);
  p.max_brake = j.value("max_brake", p.max_brake);
  p.drag = j.value("drag", p.drag);
  p.length_m = j.value("length_m", p.length_m);
  p.width_m = j.value("width_m", p.width_m);
}

VehicleState step_vehicle(const VehicleState& s, const Action& a, double dt, const VehicleParams& p) {
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("dt must be in (0, 0.1]");
  if (!std::isfinite(a.steer) || !std::isfinite(a.throttle) || !std::isfinite(a.brake)) {
    throw std::invalid_argument("non-finite action");
  }
  const double steer = std::clamp(a.steer, -1.0, 1.0);
  const double throttle = std::clamp(a.throttle, 0.0, 1.0);
  const double brake = std::clamp(a.brake, 0.0, 1.0);

  const double accel = p.max_accel * throttle - p.max_brake * brake - p.drag * s.speed;
  double v_next = s.speed + accel * dt;
  double moving_dt = dt;
  if (v_next < 0.0) {
    // Stops within the step: travel only until v hits zero.
    moving_dt = accel < 0.0 ? s.speed / -accel : 0.0;
    v_next = 0.0;
  }
  const double dist = 0.5 * (s.speed + v_next) * moving_dt;
  const double curv = std::tan(core::deg2rad(p.max_steer_deg) * steer) / p.wheelbase_m;
  const double dyaw = curv * dist;

  VehicleState out;
  out.speed = v_next;
  const double yaw = s.pose.yaw;
  if (std::abs(dyaw) < 1e-9) {
    out.pose.x = s.pose.x + dist * std::cos(yaw + 0.5 * dyaw);
    out.pose.y = s.pose.y + dist * std::sin(yaw + 0.5 * dyaw);
  } else {
    out.pose.x = s.pose.x + (std::sin(yaw + dyaw) - std::sin(yaw)) / curv;
    out.pose.y = s.pose.y - (std::cos(yaw + dyaw) - std::cos(yaw)) / curv;
  }
  out.pose.yaw = core::wrap_angle(yaw + dyaw);
  return out;
}

double turning_radius(double steer, const VehicleParams& p) {
  const double t = std::tan(core::deg2rad(p.max_steer_deg) * std::clamp(steer, -1.0, 1.0));
  if (t == 0.0) return std::numeric_limits<double>::infinity();
  return p.wheelbase_m / std::abs(t);
}

}  // namespace selfd::sim
