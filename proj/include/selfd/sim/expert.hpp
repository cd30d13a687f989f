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

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "selfd/core/types.hpp"
#include "selfd/sim/dynamics.hpp"
#include "selfd/sim/longitudinal.hpp"
#include "selfd/sim/world.hpp"

namespace selfd::sim {

struct ExpertConfig {
  int num_waypoints = 5;
  double waypoint_period_s = 0.5;
  double turn_threshold_deg = 15.0;
  double command_min_lookahead_m = 15.0;  // commands are issued before the turn enters the plan horizon
  double command_lookbehind_m = 8.0;      // and held until the turn lies this far behind
  double pursuit_min_lookahead_m = 4.0;
  double pursuit_lookahead_gain_s = 0.6;
  // Steering-noise bursts that produce off-center recovery examples.
  double noise_rate_hz = 0.15;
  double noise_min = 0.03;
  double noise_max = 0.10;
  double noise_duration_min_s = 0.5;
  double noise_duration_max_s = 1.5;
  double noise_max_offset_m = 1.2;
  IdmParams idm;

  friend bool operator==(const ExpertConfig&, const ExpertConfig&) = default;
};

void to_json(nlohmann::json& j, const ExpertConfig& c);
void from_json(const nlohmann::json& j, ExpertConfig& c);

/// Gap to the lead vehicle (if any) for an ego at arc length s at time t.
std::optional<LeadGap> lead_gap(const World& world, double s, double t, double ego_length);

/// Expert longitudinal acceleration: car following toward the turn-aware route speed.
double expert_accel(const World& world, double s, double v, double t, const ExpertConfig& c);

/// Command from the route heading change between s - lookbehind and s + max(horizon, min lookahead).
core::Command route_command(const Route& route, double s, double horizon_m, const ExpertConfig& c);

struct ExpertOutput {
  core::WaypointPlan plan;  // ego frame
  core::Command command = core::Command::kForward;
  std::vector<double> arc_lengths;  // route arc length of each waypoint
};

/// Expert plan for an ego at arc length s_ego: route centerline points at the arc lengths the
/// expert longitudinal model reaches at each waypoint time.
ExpertOutput expert_plan(const World& world, const VehicleState& ego, double s_ego, double t, const ExpertConfig& c);

/// Pure-pursuit steering toward the route centerline.
double pure_pursuit_steer(const Route& route, const VehicleState& ego, double s_ego, const ExpertConfig& c,
                          const VehicleParams& vp);

/// Throttle/brake pair that realizes a longitudinal acceleration under the vehicle model.
Action longitudinal_action(double accel, double speed, const VehicleParams& vp);

/// Time for the noise-free expert to travel from the route start to the goal.
double expert_completion_time(const World& world, const ExpertConfig& c, double initial_speed = 0.0);

/// Agent futures over the plan horizon in the ego frame at time t (agents within `radius_m`).
std::vector<core::AgentTrack> nearby_agent_futures(const World& world, const core::Pose2& ego, double t,
                                                   const ExpertConfig& c, double radius_m = 40.0);

struct EpisodeConfig {
  double duration_s = 20.0;
  double frame_period_s = 0.5;
  double sim_dt = 0.05;
  double initial_speed_min = 0.0;
  double initial_speed_max = 10.0;

  int frame_count() const;
  friend bool operator==(const EpisodeConfig&, const EpisodeConfig&) = default;
};

void to_json(nlohmann::json& j, const EpisodeConfig& c);
void from_json(const nlohmann::json& j, EpisodeConfig& c);

struct EpisodeFrame {
  int index = 0;
  double time = 0.0;
  VehicleState ego;
  double s = 0.0;
  double lateral_offset = 0.0;
  ExpertOutput expert;
};

struct EpisodeLog {
  std::vector<EpisodeFrame> frames;
  int expert_collisions = 0;  // ego/agent overlaps along the whole rollout
  double max_lateral_offset = 0.0;
};

/// Drives the expert (pure pursuit plus steering-noise bursts) through the world and logs a frame
/// every frame period.
EpisodeLog run_expert_episode(const World& world, const EpisodeConfig& ec, const ExpertConfig& c,
                              const VehicleParams& vp, std::uint64_t noise_seed);

/// Ego footprint rectangle.
core::OrientedRect ego_rect(const core::Pose2& pose, const VehicleParams& vp);

}  // namespace selfd::sim
