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

#include "selfd/core/validation.hpp"

#include <cmath>

namespace selfd::core {

ValidationResult validate_plan(const WaypointPlan& plan, const ValidationContext& ctx) {
  if (static_cast<int>(plan.waypoints.size()) != ctx.num_waypoints) return ValidationResult::fail("waypoint-count");
  for (const Vec2& p : plan.waypoints) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return ValidationResult::fail("non-finite");
  }
  if (!(plan.quality >= 0.0 && plan.quality <= 1.0)) return ValidationResult::fail("quality-range");
  return ValidationResult::pass();
}

ValidationResult validate_sample(const LabeledSample& s, const ValidationContext& ctx) {
  if (s.image.empty()) return ValidationResult::fail("image-ref");
  if (!is_command_code(command_code(s.command))) return ValidationResult::fail("command-code");
  if (!std::isfinite(s.speed)) return ValidationResult::fail("non-finite");
  if (s.speed < 0.0) return ValidationResult::fail("speed-negative");
  if (auto r = validate_plan(s.target, ctx); !r.ok()) return r;
  if (s.target.quality != 1.0) return ValidationResult::fail("ground-truth-quality");
  return ValidationResult::pass();
}

ValidationResult validate_sample(const PseudoLabeledSample& s, const ValidationContext& ctx) {
  if (s.image.empty()) return ValidationResult::fail("image-ref");
  if (!is_command_code(command_code(s.sampled_command))) return ValidationResult::fail("command-code");
  if (!std::isfinite(s.sampled_speed)) return ValidationResult::fail("non-finite");
  if (s.sampled_speed < 0.0) return ValidationResult::fail("speed-negative");
  if (s.sampled_speed < ctx.speed_lo || s.sampled_speed > ctx.speed_hi) return ValidationResult::fail("speed-range");
  return validate_plan(s.pseudo_plan, ctx);
}

}  // namespace selfd::core
