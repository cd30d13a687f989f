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

#include <optional>
#include <vector>

#include "selfd/core/types.hpp"

namespace selfd::metrics {

/// Mean L2 distance over matching waypoints. Throws std::invalid_argument on a K mismatch or K = 0.
double ade(const core::WaypointPlan& pred, const core::WaypointPlan& gt);

/// L2 distance between the last waypoints.
double fde(const core::WaypointPlan& pred, const core::WaypointPlan& gt);

/// True when any waypoint k lies inside an agent footprint at future step k, each footprint grown
/// by `ego_halfwidth` on every side. Agent futures are ego-frame poses at the waypoint times.
bool plan_collides(const core::WaypointPlan& plan, const std::vector<core::AgentTrack>& agents,
                   double ego_halfwidth = 1.0);

/// Fraction of colliding samples. Returns nullopt (not computable) when any sample lacks agent
/// annotations or the input is empty.
std::optional<double> collision_rate(const std::vector<core::WaypointPlan>& plans,
                                     const std::vector<std::optional<std::vector<core::AgentTrack>>>& agents,
                                     double ego_halfwidth = 1.0);

}  // namespace selfd::metrics
