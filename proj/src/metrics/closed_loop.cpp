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

#include "selfd/metrics/closed_loop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "selfd/core/parallel.hpp"
#include "selfd/sim/dataset.hpp"

namespace selfd::metrics {

core::WaypointPlan ExpertPolicy::plan(const PolicyInput& in) const {
  if (in.world == nullptr || in.ego == nullptr) throw std::invalid_argument("expert policy needs the world state");
  return sim::expert_plan(*in.world, *in.ego, in.route_s, in.time, config_).plan;
}

core::WaypointPlan ModelPolicy::plan(const PolicyInput& in) const {
  if (in.image == nullptr) throw std::invalid_argument("model policy needs a camera image");
  return model_.forward(core::Observation{*in.image, in.speed, in.command});
}

void ClosedLoopConfig::validate() const {
  if (routes < 0) throw std::invalid_argument("route count must be non-negative");
  if (appearances.empty()) throw std::invalid_argument("closed loop needs at least one appearance");
  if (!(sim_dt > 0.0 && sim_dt <= 0.1)) throw std::invalid_argument("sim_dt must be in (0, 0.1]");
  if (!(plan_period_s >= sim_dt)) throw std::invalid_argument("plan period shorter than the simulation step");
  if (!(timeout_factor > 0.0)) throw std::invalid_argument("timeout factor must be positive");
  world.validate();
  pid.validate(expert.num_waypoints);
}

void to_json(nlohmann::json& j, const ClosedLoopConfig& c) {
  nlohmann::json apps = nlohmann::json::array();
  for (auto a : c.appearances) apps.push_back(std::string(sim::appearance_name(a)));
  j = nlohmann::json{{"seed", c.seed},
                     {"routes", c.routes},
                     {"appearances", apps},
                     {"world", c.world},
                     {"expert", c.expert},
                     {"vehicle", c.vehicle},
                     {"pid", c.pid},
                     {"camera", c.camera},
                     {"sim_dt", c.sim_dt},
                     {"plan_period_s", c.plan_period_s},
                     {"timeout_factor", c.timeout_factor},
                     {"offroad_limit_m", c.offroad_limit_m},
                     {"deviation_limit_m", c.deviation_limit_m},
                     {"grace_period_s", c.grace_period_s},
                     {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, ClosedLoopConfig& c) {
  c.seed = j.value("seed", c.seed);
  c.routes = j.value("routes", c.routes);
  if (j.contains("appearances")) {
    c.appearances.clear();
    for (const auto& a : j.at("appearances")) c.appearances.push_back(sim::appearance_from_name(a.get<std::string>()));
  }
  if (j.contains("world")) c.world = j.at("world").get<sim::WorldConfig>();
  if (j.contains("expert")) c.expert = j.at("expert").get<sim::ExpertConfig>();
  if (j.contains("vehicle")) c.vehicle = j.at("vehicle").get<sim::VehicleParams>();
  if (j.contains("pid")) c.pid = j.at("pid").get<control::PIDConfig>();
  if (j.contains("camera")) c.camera = j.at("camera").get<core::CameraSpec>();
  c.sim_dt = j.value("sim_dt", c.sim_dt);
  c.plan_period_s = j.value("plan_period_s", c.plan_period_s);
  c.timeout_factor = j.value("timeout_factor", c.timeout_factor);
  c.offroad_limit_m = j.value("offroad_limit_m", c.offroad_limit_m);
  c.deviation_limit_m = j.value("deviation_limit_m", c.deviation_limit_m);
  c.grace_period_s = j.value("grace_period_s", c.grace_period_s);
  c.threads = j.value("threads", c.threads);
}

RouteResult run_route(const Policy& policy, const sim::World& world, sim::Appearance appearance,
                      std::uint64_t noise_seed, const ClosedLoopConfig& c) {
  const sim::Route& route = world.route;
  RouteResult r;
  r.appearance = appearance;
  r.world_seed = world.seed;
  r.timeout_s = c.timeout_factor * sim::expert_completion_time(world, c.expert, 0.0);

  const int plan_every = std::max(1, static_cast<int>(std::llround(c.plan_period_s / c.sim_dt)));
  const double horizon_s = c.expert.num_waypoints * c.expert.waypoint_period_s;
  const double span = route.goal_s() - route.start_s();

  sim::VehicleState ego{route.pose_at(route.start_s()), 0.0};
  double s = route.start_s(), s_max = s, t = 0.0;
  double grace_until = -1.0, cross_track_sum = 0.0;
  control::ControllerState cs;
  core::WaypointPlan plan;
  bool replan = true, reached = false;
  long steps = 0;
  if (c.record_trace) r.trace.push_back({t, ego, s, false});

  for (long step = 0;; ++step) {
    if (s >= route.goal_s()) {
      reached = true;
      break;
    }
    if (t >= r.timeout_s) {
      r.timed_out = true;
      break;
    }
    if (replan || step % plan_every == 0) {
      PolicyInput in;
      in.speed = ego.speed;
      in.command = sim::route_command(route, s, ego.speed * horizon_s, c.expert);
      in.world = &world;
      in.ego = &ego;
      in.route_s = s;
      in.time = t;
      core::Image image;
      if (policy.needs_image()) {
        image = sim::render(world, ego.pose, t, c.camera, appearance,
                            core::mix_seed(noise_seed, static_cast<std::uint64_t>(step)), c.render);
        in.image = &image;
      }
      plan = policy.plan(in);
      replan = false;
    }
    const control::ControlOutput u = control::control(plan, ego.speed, c.pid, cs, c.sim_dt);
    cs = u.state;
    const double v0 = ego.speed;
    ego = sim::step_vehicle(ego, u.action, c.sim_dt, c.vehicle);
    r.meters += 0.5 * (v0 + ego.speed) * c.sim_dt;
    t += c.sim_dt;
    s = route.project(ego.pose.position(), s - 1.0, s + 2.0 + ego.speed * c.sim_dt);
    s_max = std::max(s_max, s);

    const double cross_track = std::abs(core::world_to_ego(route.pose_at(s), ego.pose.position()).y);
    cross_track_sum += cross_track;
    ++steps;

    bool reset = false;
    if (t >= grace_until) {
      const auto rect = sim::ego_rect(ego.pose, c.vehicle);
      bool hit = false;
      for (const auto& a : world.agents_at(t)) hit = hit || core::overlaps(rect, a.rect);
      if (hit) {
        ++r.collisions;
        ++r.agent_collisions;
        reset = true;
      } else if (world.grid.offroad_distance(ego.pose.position()) > c.offroad_limit_m) {
        ++r.collisions;
        ++r.offroad_events;
        reset = true;
      } else if (cross_track > c.deviation_limit_m) {
        ++r.deviations;
        reset = true;
      }
    }
    if (reset) {
      ego = sim::VehicleState{route.pose_at(s), 0.0};
      cs = {};
      grace_until = t + c.grace_period_s;
      replan = true;
    }
    if (c.record_trace) r.trace.push_back({t, ego, s, reset});
  }

  r.duration_s = t;
  r.completion = span > 0.0 ? std::clamp((s_max - route.start_s()) / span, 0.0, 1.0) : 1.0;
  if (reached) r.completion = 1.0;
  r.success = reached && r.collisions == 0 && r.deviations == 0;
  r.mean_cross_track_m = steps > 0 ? cross_track_sum / static_cast<double>(steps) : 0.0;
  return r;
}

ClosedLoopReport closed_loop_eval(const Policy& policy, const ClosedLoopConfig& c) {
  c.validate();
  const std::size_t n_app = c.appearances.size();
  const std::size_t n = static_cast<std::size_t>(c.routes) * n_app;
  ClosedLoopReport report;
  report.routes.resize(n);
  core::parallel_for(n, c.threads, [&](std::size_t i) {
    const int route = static_cast<int>(i / n_app);
    const std::size_t app = i % n_app;
    const std::uint64_t seed = sim::family_seed(sim::Family::kClosedLoop, c.seed, static_cast<std::uint64_t>(route));
    const sim::World world = sim::build_world(seed, c.world);
    RouteResult r = run_route(policy, world, c.appearances[app], core::mix_seed(seed, 0xc10 + app), c);
    r.route = route;
    report.routes[i] = std::move(r);
  });
  if (n == 0) return report;
  double success = 0.0, completion = 0.0;
  for (const auto& r : report.routes) {
    success += r.success ? 1.0 : 0.0;
    completion += r.completion;
    report.meters += r.meters;
    report.collisions += r.collisions;
  }
  report.success_rate = success / static_cast<double>(n);
  report.route_completion = completion / static_cast<double>(n);
  report.collisions_per_10km = report.meters > 0.0 ? report.collisions * 10000.0 / report.meters : 0.0;
  return report;
}

}  // namespace selfd::metrics
