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

#include <nlohmann/json.hpp>

#include "selfd/core/types.hpp"
#include "selfd/sim/dynamics.hpp"

namespace selfd::control {

/// Waypoint-following PID gains. Lateral error is the heading angle (rad) to the lookahead
/// waypoint; longitudinal error is target minus current speed (m/s).
struct PIDConfig {
  double lat_kp = 1.4;
  double lat_ki = 0.05;
  double lat_kd = 0.05;
  double lon_kp = 1.2;
  double lon_ki = 0.2;
  double integral_clamp = 2.0;  // bound on both integral terms
  int lookahead_index = 2;      // 1-based waypoint index
  int speed_intervals = 2;      // target speed from the mean spacing of the first n intervals
  double waypoint_period_s = 0.5;
  double stop_speed = 0.3;      // plans slower than this hold the brake
  double stop_brake = 0.6;
  // Vehicle response used to map an acceleration command onto throttle and brake.
  double accel_scale = 3.0;
  double brake_scale = 6.0;
  double drag_feedforward = 0.05;

  void validate(int num_waypoints) const;
  friend bool operator==(const PIDConfig&, const PIDConfig&) = default;
};

void to_json(nlohmann::json& j, const PIDConfig& c);
void from_json(const nlohmann::json& j, PIDConfig& c);

struct ControllerState {
  double lat_integral = 0.0;
  double lat_prev_error = 0.0;
  bool has_prev = false;
  double lon_integral = 0.0;
};

struct ControlOutput {
  sim::Action action;
  ControllerState state;
  double target_speed = 0.0;
};

/// Speed implied by the plan: mean spacing of the first intervals (origin included) over the period.
double plan_target_speed(const core::WaypointPlan& plan, const PIDConfig& c);

/// One controller update. Outputs are saturated; throttle and brake are never both positive.
ControlOutput control(const core::WaypointPlan& plan, double current_speed, const PIDConfig& config,
                      const ControllerState& state, double dt);

}  // namespace selfd::control
