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

#include "selfd/core/geometry.hpp"

namespace selfd::sim {

/// Procedural world parameters. Roads form a Manhattan grid of two-lane, two-way streets
/// with right-hand traffic.
struct WorldConfig {
  int grid_lines = 7;  // road lines per axis
  double block_min_m = 40.0;
  double block_max_m = 70.0;
  double road_half_width_m = 3.5;
  double lane_offset_m = 1.75;
  double turn_radius_right_m = 5.0;
  double turn_radius_left_m = 9.0;
  double route_length_m = 340.0;  // drivable route length before the extension
  double route_extension_m = 80.0;
  double start_offset_m = 12.0;  // distance past the first node where the ego starts
  double turn_probability = 0.6;
  double lead_probability = 0.5;
  double lead_gap_min_m = 15.0;
  double lead_gap_max_m = 30.0;
  double lead_speed_min = 4.0;
  double lead_speed_max = 8.0;
  int oncoming_per_segment = 2;  // upper bound, uniform in [0, n]
  double oncoming_speed_min = 5.0;
  double oncoming_speed_max = 9.0;
  double agent_length_m = 4.5;
  double agent_width_m = 1.8;
  double cruise_speed_min = 8.0;
  double cruise_speed_max = 10.0;
  double lateral_accel = 2.5;  // turn speed sqrt(a_lat * R)
  double comfort_decel = 2.0;  // braking used to reach turn speeds

  void validate() const;
  friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

void to_json(nlohmann::json& j, const WorldConfig& c);
void from_json(const nlohmann::json& j, WorldConfig& c);

/// Axis-aligned road grid: vertical roads at x = xs[i], horizontal roads at y = ys[j].
struct RoadGrid {
  std::vector<double> xs;
  std::vector<double> ys;
  double half_width = 3.5;

  core::Vec2 node(int i, int j) const { return {xs[i], ys[j]}; }
  /// Distance outside the drivable area (0 on the road).
  double offroad_distance(core::Vec2 p) const;
  bool on_road(core::Vec2 p) const { return offroad_distance(p) <= 0.0; }
  /// Inside a road crossing square.
  bool in_intersection(core::Vec2 p) const;
  /// Signed lateral offset from the nearest road axis and the along-road coordinate, used for
  /// lane markings. Returns nullopt off-road or inside an intersection.
  struct MarkingCoords {
    double lateral;
    double along;
  };
  std::optional<MarkingCoords> marking_coords(core::Vec2 p) const;
};

struct GridNode {
  int i = 0;
  int j = 0;
  friend bool operator==(const GridNode&, const GridNode&) = default;
};

/// Dense lane-center polyline with arc length, heading and signed curvature (left positive).
class Route {
 public:
  struct Sample {
    double s;
    core::Vec2 p;
    double heading;
    double curvature;
    double speed_limit;  // curvature limit propagated backwards at comfort deceleration
  };

  Route() = default;
  Route(std::vector<Sample> samples, std::vector<GridNode> nodes, double goal_s, double start_s);

  const std::vector<Sample>& samples() const { return samples_; }
  const std::vector<GridNode>& nodes() const { return nodes_; }
  double length() const { return samples_.empty() ? 0.0 : samples_.back().s; }
  double start_s() const { return start_s_; }
  double goal_s() const { return goal_s_; }

  /// Interpolated pose at arc length s (clamped to the route).
  core::Pose2 pose_at(double s) const;
  core::Vec2 point_at(double s) const { return pose_at(s).position(); }
  double curvature_at(double s) const;
  double speed_limit_at(double s) const;
  void set_speed_limits(double lateral_accel, double comfort_decel);
  /// Closest arc length within [s_lo, s_hi].
  double project(core::Vec2 p, double s_lo, double s_hi) const;
  double project(core::Vec2 p) const { return project(p, 0.0, length()); }
  /// Distance from a point to the polyline.
  double distance_to(core::Vec2 p) const;

 private:
  std::size_t index_at(double s) const;

  std::vector<Sample> samples_;
  std::vector<GridNode> nodes_;
  double goal_s_ = 0.0;
  double start_s_ = 0.0;
};

/// Scripted 1-D motion along a path: arc length tabulated on a uniform time grid.
struct AlongTrack {
  double dt = 0.05;
  std::vector<double> s;  // s[k] at time k*dt
  std::vector<double> v;

  double s_at(double t) const;
  double v_at(double t) const;
};

/// Lead vehicle driving the ego route ahead of the ego.
struct LeadAgent {
  AlongTrack track;
  double length = 4.5;
  double width = 1.8;
};

/// Oncoming vehicle looping along the opposite lane of one straight road section.
struct OncomingAgent {
  core::Vec2 from;  // start of the active stretch (agent drives from -> to)
  core::Vec2 to;
  double phase_m = 0.0;
  double speed = 7.0;
  double length = 4.5;
  double width = 1.8;

  core::Pose2 pose_at(double t) const;
};

struct AgentBox {
  core::OrientedRect rect;
  int id = 0;  // stable across time, used for coloring
};

/// Static description of one episode: roads, route, agent scripts, expert cruise speed.
struct World {
  std::uint64_t seed = 0;
  WorldConfig config;
  RoadGrid grid;
  Route route;
  std::optional<LeadAgent> lead;
  std::vector<OncomingAgent> oncoming;
  double cruise_speed = 9.0;

  /// Agent footprints at time t.
  std::vector<AgentBox> agents_at(double t) const;
};

/// Deterministic world from a seed. Throws std::invalid_argument on infeasible configs.
World build_world(std::uint64_t seed, const WorldConfig& config);

}  // namespace selfd::sim
