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

#include "selfd/control/pid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace selfd::control {

void PIDConfig::validate(int num_waypoints) const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid PID config: ") + what);
  };
  require(lat_kp >= 0 && lat_ki >= 0 && lat_kd >= 0 && lon_kp >= 0 && lon_ki >= 0, "gains must be non-negative");
  require(integral_clamp >= 0, "integral clamp");
  require(lookahead_index >= 1 && lookahead_index <= num_waypoints, "lookahead index must be in [1, K]");
  require(speed_intervals >= 1 && speed_intervals <= num_waypoints, "speed intervals");
  require(waypoint_period_s > 0 && accel_scale > 0 && brake_scale > 0, "scales");
}

void to_json(nlohmann::json& j, const PIDConfig& c) {
  j = nlohmann::json{{"lat_kp", c.lat_kp},
                     {"lat_ki", c.lat_ki},
                     {"lat_kd", c.lat_kd},
                     {"lon_kp", c.lon_kp},
                     {"lon_ki", c.lon_ki},
                     {"integral_clamp", c.integral_clamp},
                     {"lookahead_index", c.lookahead_index},
                     {"speed_intervals", c.speed_intervals},
                     {"waypoint_period_s", c.waypoint_period_s},
                     {"stop_speed", c.stop_speed},
                     {"stop_brake", c.stop_brake},
                     {"accel_scale", c.accel_scale},
                     {"brake_scale", c.brake_scale},
                     {"drag_feedforward", c.drag_feedforward}};
}

void from_json(const nlohmann::json& j, PIDConfig& c) {
  c.lat_kp = j.value("lat_kp", c.lat_kp);
  c.lat_ki = j.value("lat_ki", c.lat_ki);
  c.lat_kd = j.value("lat_kd", c.lat_kd);
  c.lon_kp = j.value("lon_kp", c.lon_kp);
  c.lon_ki = j.value("lon_ki", c.lon_ki);
  c.integral_clamp = j.value("integral_clamp", c.integral_clamp);
  c.lookahead_index = j.value("lookahead_index", c.lookahead_index);
  c.speed_intervals = j.value("speed_intervals", c.speed_intervals);
  c.waypoint_period_s = j.value("waypoint_period_s", c.waypoint_period_s);
  c.stop_speed = j.value("stop_speed", c.stop_speed);
  c.stop_brake = j.value("stop_brake", c.stop_brake);
  c.accel_scale = j.value("accel_scale", c.accel_scale);
  c.brake_scale = j.value("brake_scale", c.brake_scale);
  c.drag_feedforward = j.value("drag_feedforward", c.drag_feedforward);
}

double plan_target_speed(const core::WaypointPlan& plan, const PIDConfig& c) {
  const int n = std::min<int>(c.speed_intervals, static_cast<int>(plan.size()));
  if (n == 0) return 0.0;
  double total = 0.0;
  core::Vec2 prev{0.0, 0.0};
  for (int k = 0; k < n; ++k) {
    total += (plan.waypoints[k] - prev).norm();
    prev = plan.waypoints[k];
  }
  return total / n / c.waypoint_period_s;
}

ControlOutput control(const core::WaypointPlan& plan, double current_speed, const PIDConfig& c,
                      const ControllerState& state, double dt) {
  c.validate(static_cast<int>(plan.size()));
  ControlOutput out;
  out.state = state;

  // Lateral: heading error toward the lookahead waypoint (left positive).
  const core::Vec2 target = plan.waypoints[c.lookahead_index - 1];
  const double error = target.norm() > 0.5 ? std::atan2(target.y, target.x) : 0.0;
  out.state.lat_integral = std::clamp(state.lat_integral + error * dt, -c.integral_clamp, c.integral_clamp);
  const double deriv = state.has_prev && dt > 0.0 ? (error - state.lat_prev_error) / dt : 0.0;
  out.state.lat_prev_error = error;
  out.state.has_prev = true;
  out.action.steer = std::clamp(c.lat_kp * error + c.lat_ki * out.state.lat_integral + c.lat_kd * deriv, -1.0, 1.0);

  // Longitudinal.
  const double target_speed = plan_target_speed(plan, c);
  out.target_speed = target_speed;
  if (target_speed < c.stop_speed) {
    out.state.lon_integral = 0.0;
    out.action.throttle = 0.0;
    out.action.brake = c.stop_brake;
    return out;
  }
  const double err = target_speed - current_speed;
  out.state.lon_integral = std::clamp(state.lon_integral + err * dt, -c.integral_clamp, c.integral_clamp);
  const double accel = c.lon_kp * err + c.lon_ki * out.state.lon_integral;
  const double net = accel + c.drag_feedforward * current_speed;
  if (net >= 0.0) out.action.throttle = std::min(1.0, net / c.accel_scale);
  else out.action.brake = std::min(1.0, -net / c.brake_scale);
  return out;
}

}  // namespace selfd::control
