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

#include <doctest.h>

#include <cmath>
#include <random>

#include "selfd/control/pid.hpp"
#include "selfd/metrics/closed_loop.hpp"
#include "selfd/sim/dynamics.hpp"
#include "selfd/sim/world.hpp"

using namespace selfd;
using control::ControllerState;
using control::PIDConfig;

namespace {

core::WaypointPlan straight_plan(double speed, int k = 5, double period = 0.5) {
  core::WaypointPlan p;
  for (int i = 1; i <= k; ++i) p.waypoints.push_back({speed * period * i, 0.0});
  return p;
}

// Points on a circle of radius r through the origin, tangent to +x, curving left.
core::WaypointPlan arc_plan(double speed, double radius, int k = 5, double period = 0.5) {
  core::WaypointPlan p;
  for (int i = 1; i <= k; ++i) {
    const double a = speed * period * i / radius;
    p.waypoints.push_back({radius * std::sin(a), radius * (1.0 - std::cos(a))});
  }
  return p;
}

metrics::ClosedLoopConfig agent_free(int routes) {
  metrics::ClosedLoopConfig c;
  c.routes = routes;
  c.seed = 77;
  c.appearances = {sim::Appearance::kDay};
  c.world.lead_probability = 0.0;
  c.world.oncoming_per_segment = 0;
  c.record_trace = true;
  return c;
}

}  // namespace

TEST_CASE("zero-error fixed point holds speed and heading") {
  const PIDConfig c;
  for (double v : {2.0, 5.0, 9.0}) {
    const auto out = control::control(straight_plan(v), v, c, {}, 0.05);
    CHECK(std::abs(out.action.steer) < 1e-3);
    CHECK(out.action.brake == 0.0);
    CHECK(out.target_speed == doctest::Approx(v));
    // Throttle only offsets drag.
    CHECK(out.action.throttle == doctest::Approx(c.drag_feedforward * v / c.accel_scale));
  }
}

TEST_CASE("stop plan brakes without throttle") {
  core::WaypointPlan stop;
  stop.waypoints.assign(5, {0.0, 0.0});
  for (double v : {0.0, 3.0, 10.0}) {
    const auto out = control::control(stop, v, {}, {}, 0.05);
    CHECK(out.action.throttle == 0.0);
    CHECK(out.action.brake > 0.0);
    CHECK(out.action.steer == 0.0);
  }
}

TEST_CASE("left-bending plan steers left and the rollout turns left") {
  const PIDConfig c;
  const sim::VehicleParams vp;
  sim::VehicleState s{{0.0, 0.0, 0.0}, 6.0};
  ControllerState st;
  const auto first = control::control(arc_plan(6.0, 15.0), s.speed, c, st, 0.05);
  CHECK(first.action.steer > 0.0);
  for (int i = 0; i < 20; ++i) {
    const auto out = control::control(arc_plan(6.0, 15.0), s.speed, c, st, 0.05);
    st = out.state;
    s = sim::step_vehicle(s, out.action, 0.05, vp);
  }
  CHECK(s.pose.yaw > 0.2);
  CHECK(s.pose.y > 0.5);
}

TEST_CASE("outputs saturate and throttle and brake are exclusive") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-40.0, 40.0), sp(0.0, 15.0), dt(0.01, 0.1);
  PIDConfig c;
  c.integral_clamp = 0.7;
  ControllerState st;
  for (int i = 0; i < 5000; ++i) {
    core::WaypointPlan p;
    for (int k = 0; k < 5; ++k) p.waypoints.push_back({u(rng), u(rng)});
    const auto out = control::control(p, sp(rng), c, st, dt(rng));
    st = out.state;
    CHECK(out.action.steer >= -1.0);
    CHECK(out.action.steer <= 1.0);
    CHECK(out.action.throttle >= 0.0);
    CHECK(out.action.throttle <= 1.0);
    CHECK(out.action.brake >= 0.0);
    CHECK(out.action.brake <= 1.0);
    CHECK_FALSE((out.action.throttle > 0.0 && out.action.brake > 0.0));
    CHECK(std::abs(st.lat_integral) <= c.integral_clamp);
    CHECK(std::abs(st.lon_integral) <= c.integral_clamp);
  }
}

TEST_CASE("config validation and json round trip") {
  PIDConfig c;
  c.lookahead_index = 0;
  CHECK_THROWS_AS(c.validate(5), std::invalid_argument);
  c.lookahead_index = 6;
  CHECK_THROWS_AS(c.validate(5), std::invalid_argument);
  c.lookahead_index = 3;
  c.lat_kp = -1.0;
  CHECK_THROWS_AS(c.validate(5), std::invalid_argument);
  c.lat_kp = 0.9;
  c.lon_ki = 0.33;
  nlohmann::json j = c;
  CHECK(j.get<PIDConfig>() == c);
}

TEST_CASE("expert plans tracked by the default controller stay near the route") {
  const auto cfg = agent_free(12);
  const metrics::ExpertPolicy expert(cfg.expert);
  const auto report = metrics::closed_loop_eval(expert, cfg);
  double straight_sum = 0.0, turn_sum = 0.0;
  long straight_n = 0, turn_n = 0;
  for (const auto& r : report.routes) {
    const sim::World world = sim::build_world(r.world_seed, cfg.world);
    for (const auto& p : r.trace) {
      const double xt = std::abs(core::world_to_ego(world.route.pose_at(p.route_s), p.ego.pose.position()).y);
      if (world.grid.in_intersection(p.ego.pose.position())) {
        turn_sum += xt;
        ++turn_n;
      } else {
        straight_sum += xt;
        ++straight_n;
      }
    }
  }
  const double straight = straight_sum / straight_n, turn = turn_sum / turn_n;
  MESSAGE("mean cross-track straight " << straight << " m, intersections " << turn << " m");
  CHECK(straight < 0.5);
  CHECK(turn < 1.0);
  CHECK(report.success_rate == 1.0);
  CHECK(report.collisions == 0);
}
