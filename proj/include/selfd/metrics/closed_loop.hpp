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
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "selfd/control/pid.hpp"
#include "selfd/core/camera.hpp"
#include "selfd/core/types.hpp"
#include "selfd/planner/network.hpp"
#include "selfd/sim/dynamics.hpp"
#include "selfd/sim/expert.hpp"
#include "selfd/sim/render.hpp"
#include "selfd/sim/world.hpp"

namespace selfd::metrics {

/// What a driving policy sees at one planning step. `image` is null for policies that do not
/// request it. World, ego state and route progress are privileged and only used by the expert.
struct PolicyInput {
  const core::Image* image = nullptr;
  double speed = 0.0;
  core::Command command = core::Command::kForward;
  const sim::World* world = nullptr;
  const sim::VehicleState* ego = nullptr;
  double route_s = 0.0;
  double time = 0.0;
};

/// Plans are produced concurrently for different routes, so implementations must be safe to call
/// from several threads.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual bool needs_image() const = 0;
  virtual core::WaypointPlan plan(const PolicyInput& input) const = 0;
};

/// Privileged expert: the simulator's own waypoint plan.
class ExpertPolicy final : public Policy {
 public:
  explicit ExpertPolicy(sim::ExpertConfig config = {}) : config_(config) {}
  bool needs_image() const override { return false; }
  core::WaypointPlan plan(const PolicyInput& input) const override;

 private:
  sim::ExpertConfig config_;
};

/// A trained planner driving from the rendered camera image.
class ModelPolicy final : public Policy {
 public:
  explicit ModelPolicy(const planner::Planner& model) : model_(model) {}
  bool needs_image() const override { return true; }
  core::WaypointPlan plan(const PolicyInput& input) const override;

 private:
  const planner::Planner& model_;
};

struct ClosedLoopConfig {
  std::uint64_t seed = 1;
  int routes = 10;
  std::vector<sim::Appearance> appearances{sim::Appearance::kDay, sim::Appearance::kNight};
  sim::WorldConfig world;
  sim::ExpertConfig expert;
  sim::VehicleParams vehicle;
  control::PIDConfig pid;
  core::CameraSpec camera;
  sim::RenderOptions render;
  double sim_dt = 0.05;
  double plan_period_s = 0.1;
  double timeout_factor = 2.0;       // multiple of the expert completion time
  double offroad_limit_m = 1.0;      // leaving the road by more than this is a collision event
  double deviation_limit_m = 4.0;    // route deviation that triggers a reset without a collision
  double grace_period_s = 2.0;       // no events are counted right after a reset
  int threads = 1;
  bool record_trace = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const ClosedLoopConfig& c);
void from_json(const nlohmann::json& j, ClosedLoopConfig& c);

struct TracePoint {
  double time = 0.0;
  sim::VehicleState ego;
  double route_s = 0.0;
  bool reset = false;  // teleported back onto the route at this step
};

struct RouteResult {
  int route = 0;
  sim::Appearance appearance = sim::Appearance::kDay;
  std::uint64_t world_seed = 0;
  bool success = false;
  bool timed_out = false;
  double completion = 0.0;  // fraction of the route length covered
  double meters = 0.0;      // odometer
  double duration_s = 0.0;
  double timeout_s = 0.0;
  int collisions = 0;
  int agent_collisions = 0;
  int offroad_events = 0;
  int deviations = 0;
  double mean_cross_track_m = 0.0;
  std::vector<TracePoint> trace;
};

struct ClosedLoopReport {
  std::vector<RouteResult> routes;
  double success_rate = 0.0;
  double route_completion = 0.0;
  double collisions_per_10km = 0.0;
  double meters = 0.0;
  int collisions = 0;
};

/// Drives one route: policy at the planning period, PID at every simulation step.
RouteResult run_route(const Policy& policy, const sim::World& world, sim::Appearance appearance,
                      std::uint64_t noise_seed, const ClosedLoopConfig& config);

/// Every route (closed-loop world family) under every appearance. Deterministic for a fixed policy,
/// seed and config regardless of the thread count.
ClosedLoopReport closed_loop_eval(const Policy& policy, const ClosedLoopConfig& config);

}  // namespace selfd::metrics
