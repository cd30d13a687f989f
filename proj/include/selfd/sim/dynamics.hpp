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

#include "selfd/core/geometry.hpp"

namespace selfd::sim {

struct VehicleParams {
  double wheelbase_m = 2.7;
  double max_steer_deg = 35.0;
  double max_accel = 3.0;
  double max_brake = 6.0;
  double drag = 0.05;  // 1/s, linear speed damping
  double length_m = 4.5;
  double width_m = 1.8;

  friend bool operator==(const VehicleParams&, const VehicleParams&) = default;
};

void to_json(nlohmann::json& j, const VehicleParams& p);
void from_json(const nlohmann::json& j, VehicleParams& p);

struct VehicleState {
  core::Pose2 pose;
  double speed = 0.0;
};

/// Normalized controls. Steering is left positive.
struct Action {
  double steer = 0.0;
  double throttle = 0.0;
  double brake = 0.0;
};

/// Kinematic bicycle step. Speed is integrated first (trapezoidal position update) and never
/// drops below zero; heading follows the exact arc for the step.
/// Throws std::invalid_argument for dt outside (0, 0.1] or non-finite controls.
VehicleState step_vehicle(const VehicleState& s, const Action& a, double dt, const VehicleParams& p);

/// Turning radius for a normalized steering command (infinite for zero steer).
double turning_radius(double steer, const VehicleParams& p);

}  // namespace selfd::sim
