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

#include "selfd/metrics/open_loop.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace selfd::metrics {
namespace {

void check_sizes(const core::WaypointPlan& pred, const core::WaypointPlan& gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("waypoint count mismatch: " + std::to_string(pred.size()) + " vs " +
                                std::to_string(gt.size()));
  }
  if (pred.size() == 0) throw std::invalid_argument("empty waypoint plan");
}

}  // namespace

double ade(const core::WaypointPlan& pred, const core::WaypointPlan& gt) {
  check_sizes(pred, gt);
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) sum += (pred.waypoints[k] - gt.waypoints[k]).norm();
  return sum / static_cast<double>(pred.size());
}

double fde(const core::WaypointPlan& pred, const core::WaypointPlan& gt) {
  check_sizes(pred, gt);
  return (pred.waypoints.back() - gt.waypoints.back()).norm();
}

bool plan_collides(const core::WaypointPlan& plan, const std::vector<core::AgentTrack>& agents,
                   double ego_halfwidth) {
  for (const auto& agent : agents) {
    const std::size_t n = std::min(plan.size(), agent.future.size());
    for (std::size_t k = 0; k < n; ++k) {
      if (core::contains(agent.footprint(k), plan.waypoints[k], ego_halfwidth)) return true;
    }
  }
  return false;
}

std::optional<double> collision_rate(const std::vector<core::WaypointPlan>& plans,
                                     const std::vector<std::optional<std::vector<core::AgentTrack>>>& agents,
                                     double ego_halfwidth) {
  if (plans.size() != agents.size()) throw std::invalid_argument("plans and agent annotations differ in length");
  if (plans.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (!agents[i]) return std::nullopt;
    if (plan_collides(plans[i], *agents[i], ego_halfwidth)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(plans.size());
}

}  // namespace selfd::metrics
