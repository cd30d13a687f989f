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

#include "selfd/metrics/closed_loop.hpp"
#include "selfd/metrics/open_loop.hpp"
#include "test_support.hpp"

using namespace selfd;
using core::Vec2;

namespace {

double ade_oracle(const core::WaypointPlan& a, const core::WaypointPlan& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.waypoints.size(); ++k) {
    const double dx = a.waypoints[k].x - b.waypoints[k].x;
    const double dy = a.waypoints[k].y - b.waypoints[k].y;
    s += std::sqrt(dx * dx + dy * dy);
  }
  return s / a.waypoints.size();
}

// Corner-based half-plane test, independent of the library's frame transform.
bool in_rect_oracle(const core::OrientedRect& r, Vec2 p, double inflate) {
  const double hl = r.half_length + inflate, hw = r.half_width + inflate;
  const double c = std::cos(r.center.yaw), s = std::sin(r.center.yaw);
  const Vec2 ax{c, s}, ay{-s, c}, o{r.center.x, r.center.y};
  const Vec2 corners[4] = {o + hl * ax + hw * ay, o - hl * ax + hw * ay, o - hl * ax - hw * ay, o + hl * ax - hw * ay};
  for (int i = 0; i < 4; ++i) {
    const Vec2 e = corners[(i + 1) % 4] - corners[i];
    const Vec2 q = p - corners[i];
    // Counter-clockwise corners: inside means left of (or on) every edge.
    if (e.x * q.y - e.y * q.x < -1e-12) return false;
  }
  return true;
}

std::vector<core::AgentTrack> random_agents(std::mt19937_64& rng, int k) {
  std::uniform_int_distribution<int> count(0, 4);
  std::uniform_real_distribution<double> pos(-3.0, 20.0), lat(-6.0, 6.0), yaw(-3.2, 3.2), size(1.0, 5.0);
  std::vector<core::AgentTrack> out(static_cast<std::size_t>(count(rng)));
  for (auto& a : out) {
    a.length = size(rng);
    a.width = 0.5 * size(rng);
    for (int i = 0; i < k; ++i) a.future.push_back({pos(rng), lat(rng), yaw(rng)});
  }
  return out;
}

bool collides_oracle(const core::WaypointPlan& plan, const std::vector<core::AgentTrack>& agents, double hw) {
  bool hit = false;
  for (const auto& a : agents) {
    for (std::size_t k = 0; k < plan.waypoints.size(); ++k) {
      const core::OrientedRect r{a.future[k], 0.5 * a.length, 0.5 * a.width};
      hit = hit || in_rect_oracle(r, plan.waypoints[k], hw);
    }
  }
  return hit;
}

class ZeroPolicy final : public metrics::Policy {
 public:
  bool needs_image() const override { return false; }
  core::WaypointPlan plan(const metrics::PolicyInput&) const override {
    core::WaypointPlan p;
    p.waypoints.assign(5, {0.0, 0.0});
    return p;
  }
};

metrics::ClosedLoopConfig agent_free(int routes) {
  metrics::ClosedLoopConfig c;
  c.routes = routes;
  c.seed = 3;
  c.appearances = {sim::Appearance::kDay};
  c.world.lead_probability = 0.0;
  c.world.oncoming_per_segment = 0;
  return c;
}

}  // namespace

TEST_CASE("ade and fde closed forms") {
  std::mt19937_64 rng(1);
  const auto gt = testing::random_plan(5, rng);
  CHECK(metrics::ade(gt, gt) == 0.0);
  CHECK(metrics::fde(gt, gt) == 0.0);
  auto shifted = gt;
  for (auto& w : shifted.waypoints) w = w + Vec2{3.0, 4.0};
  CHECK(metrics::ade(shifted, gt) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(metrics::fde(shifted, gt) == doctest::Approx(5.0).epsilon(1e-12));
  auto short_plan = gt;
  short_plan.waypoints.pop_back();
  CHECK_THROWS_AS(metrics::ade(short_plan, gt), std::invalid_argument);
  CHECK_THROWS_AS(metrics::fde(gt, short_plan), std::invalid_argument);
}

TEST_CASE("ade and fde match a scalar oracle on random pairs") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const int k = 1 + static_cast<int>(rng() % 8);
    const auto a = testing::random_plan(k, rng), b = testing::random_plan(k, rng);
    CHECK(metrics::ade(a, b) == doctest::Approx(ade_oracle(a, b)).epsilon(1e-9));
    const double dx = a.waypoints.back().x - b.waypoints.back().x, dy = a.waypoints.back().y - b.waypoints.back().y;
    CHECK(metrics::fde(a, b) == doctest::Approx(std::sqrt(dx * dx + dy * dy)).epsilon(1e-9));
  }
}

TEST_CASE("ade and fde are invariant to a shared rigid transform") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-3.1, 3.1), off(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    auto a = testing::random_plan(5, rng), b = testing::random_plan(5, rng);
    const double before_ade = metrics::ade(a, b), before_fde = metrics::fde(a, b);
    const double th = ang(rng);
    const Vec2 t{off(rng), off(rng)};
    for (auto* p : {&a, &b}) {
      for (auto& w : p->waypoints) w = core::rotate(w, th) + t;
    }
    CHECK(metrics::ade(a, b) == doctest::Approx(before_ade).epsilon(1e-9));
    CHECK(metrics::fde(a, b) == doctest::Approx(before_fde).epsilon(1e-9));
  }
}

TEST_CASE("point in oriented rectangle matches the corner oracle") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> c(-5.0, 5.0), yaw(-3.2, 3.2), size(0.2, 3.0), infl(0.0, 1.0);
  int inside = 0;
  for (int i = 0; i < 2000; ++i) {
    const core::OrientedRect r{{c(rng), c(rng), yaw(rng)}, size(rng), size(rng)};
    const Vec2 p{c(rng), c(rng)};
    const double inflate = infl(rng);
    const bool got = core::contains(r, p, inflate);
    CHECK(got == in_rect_oracle(r, p, inflate));
    inside += got;
  }
  CHECK(inside > 100);
}

TEST_CASE("collision rate basics") {
  core::WaypointPlan plan;
  for (int k = 1; k <= 5; ++k) plan.waypoints.push_back({2.0 * k, 0.0});
  std::vector<core::WaypointPlan> plans{plan};
  CHECK(*metrics::collision_rate(plans, {std::vector<core::AgentTrack>{}}) == 0.0);

  core::AgentTrack agent;
  for (int k = 0; k < 5; ++k) agent.future.push_back({30.0, 10.0, 0.0});
  agent.future[2] = {plan.waypoints[2].x, plan.waypoints[2].y, 0.7};
  CHECK(*metrics::collision_rate(plans, {std::vector<core::AgentTrack>{agent}}) == 1.0);

  // Same agent at a different step does not collide.
  core::AgentTrack late = agent;
  std::swap(late.future[2], late.future[4]);
  CHECK(*metrics::collision_rate(plans, {std::vector<core::AgentTrack>{late}}) == 0.0);

  CHECK_FALSE(metrics::collision_rate(plans, {std::nullopt}).has_value());
  CHECK_FALSE(metrics::collision_rate({}, {}).has_value());
}

TEST_CASE("collision rate matches the brute-force oracle on random scenes") {
  std::mt19937_64 rng(5);
  std::vector<core::WaypointPlan> plans;
  std::vector<std::optional<std::vector<core::AgentTrack>>> agents;
  for (int i = 0; i < 1000; ++i) {
    auto p = testing::random_plan(5, rng, 8.0);
    for (auto& w : p.waypoints) w.x += 8.0;
    auto a = random_agents(rng, 5);
    CHECK(metrics::plan_collides(p, a, 1.0) == collides_oracle(p, a, 1.0));
    plans.push_back(std::move(p));
    agents.emplace_back(std::move(a));
  }
  for (double hw : {0.0, 0.5, 1.0, 2.0}) {
    int hits = 0;
    for (std::size_t i = 0; i < plans.size(); ++i) hits += collides_oracle(plans[i], *agents[i], hw);
    const double expected = hits / 1000.0;
    CHECK(*metrics::collision_rate(plans, agents, hw) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("collision rate is monotone in the ego half-width") {
  std::mt19937_64 rng(6);
  std::vector<core::WaypointPlan> plans;
  std::vector<std::optional<std::vector<core::AgentTrack>>> agents;
  for (int i = 0; i < 300; ++i) {
    plans.push_back(testing::random_plan(5, rng, 10.0));
    agents.emplace_back(random_agents(rng, 5));
  }
  double prev = -1.0;
  for (double hw = 0.0; hw <= 3.0; hw += 0.25) {
    const double r = *metrics::collision_rate(plans, agents, hw);
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("closed loop: expert plans succeed on agent-free routes") {
  auto cfg = agent_free(4);
  cfg.record_trace = true;
  const metrics::ExpertPolicy expert(cfg.expert);
  const auto report = metrics::closed_loop_eval(expert, cfg);
  REQUIRE(report.routes.size() == 4);
  CHECK(report.success_rate == 1.0);
  CHECK(report.route_completion == 1.0);
  CHECK(report.collisions == 0);
  CHECK(report.collisions_per_10km == 0.0);
  for (const auto& r : report.routes) {
    // Independent odometer: summed chord lengths of the trace.
    double chords = 0.0;
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      chords += (r.trace[i].ego.pose.position() - r.trace[i - 1].ego.pose.position()).norm();
    }
    CHECK(std::abs(chords - r.meters) <= 1e-3 * r.meters);
    CHECK(r.meters > 0.9 * (sim::build_world(r.world_seed, cfg.world).route.goal_s() -
                            sim::build_world(r.world_seed, cfg.world).route.start_s()));
  }
}

TEST_CASE("closed loop: an all-zero plan stays parked") {
  const auto cfg = agent_free(2);
  const auto report = metrics::closed_loop_eval(ZeroPolicy{}, cfg);
  CHECK(report.success_rate == 0.0);
  CHECK(report.route_completion < 0.01);
  for (const auto& r : report.routes) CHECK(r.timed_out);
}

TEST_CASE("closed loop is deterministic and independent of thread count") {
  auto cfg = agent_free(3);
  cfg.world = {};  // with agents
  cfg.appearances = {sim::Appearance::kDay, sim::Appearance::kRain};
  const metrics::ExpertPolicy expert(cfg.expert);
  const auto a = metrics::closed_loop_eval(expert, cfg);
  cfg.threads = 3;
  const auto b = metrics::closed_loop_eval(expert, cfg);
  REQUIRE(a.routes.size() == 6);
  CHECK(a.meters == b.meters);
  CHECK(a.collisions == b.collisions);
  CHECK(a.success_rate == b.success_rate);
  for (std::size_t i = 0; i < a.routes.size(); ++i) CHECK(a.routes[i].duration_s == b.routes[i].duration_s);
}
