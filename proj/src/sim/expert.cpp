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

#include "selfd/sim/expert.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace selfd::sim {

void to_json(nlohmann::json& j, const ExpertConfig& c) {
  j = nlohmann::json{{"num_waypoints", c.num_waypoints},
                     {"waypoint_period_s", c.waypoint_period_s},
                     {"turn_threshold_deg", c.turn_threshold_deg},
                     {"command_min_lookahead_m", c.command_min_lookahead_m},
                     {"command_lookbehind_m", c.command_lookbehind_m},
                     {"pursuit_min_lookahead_m", c.pursuit_min_lookahead_m},
                     {"pursuit_lookahead_gain_s", c.pursuit_lookahead_gain_s},
                     {"noise_rate_hz", c.noise_rate_hz},
                     {"noise_min", c.noise_min},
                     {"noise_max", c.noise_max},
                     {"noise_duration_min_s", c.noise_duration_min_s},
                     {"noise_duration_max_s", c.noise_duration_max_s},
                     {"noise_max_offset_m", c.noise_max_offset_m},
                     {"idm",
                      {{"max_accel", c.idm.max_accel},
                       {"comfort_decel", c.idm.comfort_decel},
                       {"min_gap_m", c.idm.min_gap_m},
                       {"time_headway_s", c.idm.time_headway_s},
                       {"hard_decel", c.idm.hard_decel}}}};
}

void from_json(const nlohmann::json& j, ExpertConfig& c) {
  c.num_waypoints = j.value("num_waypoints", c.num_waypoints);
  c.waypoint_period_s = j.value("waypoint_period_s", c.waypoint_period_s);
  c.turn_threshold_deg = j.value("turn_threshold_deg", c.turn_threshold_deg);
  c.command_min_lookahead_m = j.value("command_min_lookahead_m", c.command_min_lookahead_m);
  c.command_lookbehind_m = j.value("command_lookbehind_m", c.command_lookbehind_m);
  c.pursuit_min_lookahead_m = j.value("pursuit_min_lookahead_m", c.pursuit_min_lookahead_m);
  c.pursuit_lookahead_gain_s = j.value("pursuit_lookahead_gain_s", c.pursuit_lookahead_gain_s);
  c.noise_rate_hz = j.value("noise_rate_hz", c.noise_rate_hz);
  c.noise_min = j.value("noise_min", c.noise_min);
  c.noise_max = j.value("noise_max", c.noise_max);
  c.noise_duration_min_s = j.value("noise_duration_min_s", c.noise_duration_min_s);
  c.noise_duration_max_s = j.value("noise_duration_max_s", c.noise_duration_max_s);
  c.noise_max_offset_m = j.value("noise_max_offset_m", c.noise_max_offset_m);
  if (j.contains("idm")) {
    const auto& i = j.at("idm");
    c.idm.max_accel = i.value("max_accel", c.idm.max_accel);
    c.idm.comfort_decel = i.value("comfort_decel", c.idm.comfort_decel);
    c.idm.min_gap_m = i.value("min_gap_m", c.idm.min_gap_m);
    c.idm.time_headway_s = i.value("time_headway_s", c.idm.time_headway_s);
    c.idm.hard_decel = i.value("hard_decel", c.idm.hard_decel);
  }
}

void to_json(nlohmann::json& j, const EpisodeConfig& c) {
  j = nlohmann::json{{"duration_s", c.duration_s},
                     {"frame_period_s", c.frame_period_s},
                     {"sim_dt", c.sim_dt},
                     {"initial_speed_min", c.initial_speed_min},
                     {"initial_speed_max", c.initial_speed_max}};
}

void from_json(const nlohmann::json& j, EpisodeConfig& c) {
  c.duration_s = j.value("duration_s", c.duration_s);
  c.frame_period_s = j.value("frame_period_s", c.frame_period_s);
  c.sim_dt = j.value("sim_dt", c.sim_dt);
  c.initial_speed_min = j.value("initial_speed_min", c.initial_speed_min);
  c.initial_speed_max = j.value("initial_speed_max", c.initial_speed_max);
}

int EpisodeConfig::frame_count() const {
  if (!(duration_s > 0.0 && frame_period_s > 0.0)) throw std::invalid_argument("episode timing must be positive");
  return static_cast<int>(std::llround(duration_s / frame_period_s));
}

std::optional<LeadGap> lead_gap(const World& world, double s, double t, double ego_length) {
  if (!world.lead) return std::nullopt;
  const double sl = world.lead->track.s_at(t);
  if (sl >= world.route.length() || sl < s) return std::nullopt;
  const double gap = sl - s - 0.5 * (ego_length + world.lead->length);
  return LeadGap{gap, world.lead->track.v_at(t)};
}

double expert_accel(const World& world, double s, double v, double t, const ExpertConfig& c) {
  const double v_des = std::min(world.cruise_speed, world.route.speed_limit_at(s));
  return idm_accel(v, v_des, lead_gap(world, s, t, world.config.agent_length_m), c.idm);
}

core::Command route_command(const Route& route, double s, double horizon_m, const ExpertConfig& c) {
  const double ahead = std::max(horizon_m, c.command_min_lookahead_m);
  const double dpsi =
      core::wrap_angle(route.pose_at(s + ahead).yaw - route.pose_at(std::max(0.0, s - c.command_lookbehind_m)).yaw);
  const double th = core::deg2rad(c.turn_threshold_deg);
  if (dpsi >= th) return core::Command::kLeft;
  if (dpsi <= -th) return core::Command::kRight;
  return core::Command::kForward;
}

ExpertOutput expert_plan(const World& world, const VehicleState& ego, double s_ego, double t, const ExpertConfig& c) {
  constexpr double kDt = 0.05;
  const int steps_per_wp = static_cast<int>(std::llround(c.waypoint_period_s / kDt));
  ExpertOutput out;
  double s = s_ego, v = ego.speed, tau = 0.0;
  for (int k = 1; k <= c.num_waypoints; ++k) {
    for (int i = 0; i < steps_per_wp; ++i) {
      const double a = expert_accel(world, s, v, t + tau, c);
      const double v_next = std::max(0.0, v + a * kDt);
      s += 0.5 * (v + v_next) * kDt;
      v = v_next;
      tau += kDt;
    }
    out.arc_lengths.push_back(s);
    out.plan.waypoints.push_back(core::world_to_ego(ego.pose, world.route.point_at(s)));
  }
  out.plan.quality = 1.0;
  out.command = route_command(world.route, s_ego, out.arc_lengths.back() - s_ego, c);
  return out;
}

double pure_pursuit_steer(const Route& route, const VehicleState& ego, double s_ego, const ExpertConfig& c,
                          const VehicleParams& vp) {
  const double ld = std::max(c.pursuit_min_lookahead_m, c.pursuit_lookahead_gain_s * ego.speed + 2.0);
  const core::Vec2 target = core::world_to_ego(ego.pose, route.point_at(s_ego + ld));
  const double d2 = std::max(core::dot(target, target), 1e-6);
  const double curvature = 2.0 * target.y / d2;
  const double delta = std::atan(curvature * vp.wheelbase_m);
  return std::clamp(delta / core::deg2rad(vp.max_steer_deg), -1.0, 1.0);
}

Action longitudinal_action(double accel, double speed, const VehicleParams& vp) {
  const double net = accel + vp.drag * speed;
  Action a;
  if (net >= 0.0) a.throttle = std::min(1.0, net / vp.max_accel);
  else a.brake = std::min(1.0, -net / vp.max_brake);
  return a;
}

double expert_completion_time(const World& world, const ExpertConfig& c, double initial_speed) {
  constexpr double kDt = 0.05;
  double s = world.route.start_s(), v = initial_speed, t = 0.0;
  while (s < world.route.goal_s()) {
    const double a = expert_accel(world, s, v, t, c);
    const double v_next = std::max(0.0, v + a * kDt);
    s += 0.5 * (v + v_next) * kDt;
    v = v_next;
    t += kDt;
    if (t > 3600.0) throw std::runtime_error("expert cannot complete the route");
  }
  return t;
}

std::vector<core::AgentTrack> nearby_agent_futures(const World& world, const core::Pose2& ego, double t,
                                                   const ExpertConfig& c, double radius_m) {
  const auto now = world.agents_at(t);
  std::vector<core::AgentTrack> out;
  for (const auto& a : now) {
    if ((a.rect.center.position() - ego.position()).norm() > radius_m) continue;
    core::AgentTrack track;
    track.length = 2.0 * a.rect.half_length;
    track.width = 2.0 * a.rect.half_width;
    bool present = true;
    for (int k = 1; k <= c.num_waypoints && present; ++k) {
      const auto future = world.agents_at(t + k * c.waypoint_period_s);
      auto it = std::find_if(future.begin(), future.end(), [&](const AgentBox& b) { return b.id == a.id; });
      if (it == future.end()) {
        present = false;
        break;
      }
      track.future.push_back(core::world_to_ego(ego, it->rect.center));
    }
    if (present) out.push_back(std::move(track));
  }
  return out;
}

core::OrientedRect ego_rect(const core::Pose2& pose, const VehicleParams& vp) {
  return {pose, 0.5 * vp.length_m, 0.5 * vp.width_m};
}

EpisodeLog run_expert_episode(const World& world, const EpisodeConfig& ec, const ExpertConfig& c,
                              const VehicleParams& vp, std::uint64_t noise_seed) {
  std::mt19937_64 rng(noise_seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int frames = ec.frame_count();
  const int steps_per_frame = static_cast<int>(std::llround(ec.frame_period_s / ec.sim_dt));
  if (steps_per_frame < 1) throw std::invalid_argument("frame period shorter than the simulation step");

  const Route& route = world.route;
  VehicleState ego;
  ego.pose = route.pose_at(route.start_s());
  double v0 = ec.initial_speed_min + (ec.initial_speed_max - ec.initial_speed_min) * uni(rng);
  v0 = std::min({v0, world.cruise_speed, route.speed_limit_at(route.start_s())});
  if (auto g = lead_gap(world, route.start_s(), 0.0, vp.length_m)) v0 = std::min(v0, g->lead_speed + 2.0);
  ego.speed = v0;

  EpisodeLog log;
  double s = route.start_s();
  double t = 0.0;
  double burst_left = 0.0, burst_value = 0.0;
  for (int f = 0; f < frames; ++f) {
    EpisodeFrame frame;
    frame.index = f;
    frame.time = t;
    frame.ego = ego;
    frame.s = s;
    const core::Vec2 local = core::world_to_ego(route.pose_at(s), ego.pose.position());
    frame.lateral_offset = local.y;
    frame.expert = expert_plan(world, ego, s, t, c);
    log.frames.push_back(std::move(frame));

    for (int k = 0; k < steps_per_frame; ++k) {
      const double offset = std::abs(core::world_to_ego(route.pose_at(s), ego.pose.position()).y);
      log.max_lateral_offset = std::max(log.max_lateral_offset, offset);
      if (burst_left <= 0.0 && uni(rng) < c.noise_rate_hz * ec.sim_dt) {
        burst_left = c.noise_duration_min_s + (c.noise_duration_max_s - c.noise_duration_min_s) * uni(rng);
        const double mag = c.noise_min + (c.noise_max - c.noise_min) * uni(rng);
        burst_value = uni(rng) < 0.5 ? -mag : mag;
      }
      if (offset > c.noise_max_offset_m) burst_left = 0.0;
      double steer = pure_pursuit_steer(route, ego, s, c, vp);
      if (burst_left > 0.0) {
        steer += burst_value;
        burst_left -= ec.sim_dt;
      }
      Action act = longitudinal_action(expert_accel(world, s, ego.speed, t, c), ego.speed, vp);
      act.steer = std::clamp(steer, -1.0, 1.0);
      ego = step_vehicle(ego, act, ec.sim_dt, vp);
      t += ec.sim_dt;
      s = route.project(ego.pose.position(), s - 1.0, s + 2.0 + ego.speed * ec.sim_dt);
      const auto rect = ego_rect(ego.pose, vp);
      for (const auto& a : world.agents_at(t)) {
        if (core::overlaps(rect, a.rect)) ++log.expert_collisions;
      }
    }
  }
  return log;
}

}  // namespace selfd::sim
