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

#include <string>

#include "selfd/core/types.hpp"

namespace selfd::core {

struct ValidationResult {
  std::string violation;  // empty when ok

  bool ok() const { return violation.empty(); }
  static ValidationResult pass() { return {}; }
  static ValidationResult fail(std::string name) { return {std::move(name)}; }
};

struct ValidationContext {
  int num_waypoints = 5;
  // Pseudo samples only: the configured what-if sampling range.
  double speed_lo = 0.0;
  double speed_hi = 12.0;
};

// Invariant names reported on failure: "waypoint-count", "non-finite", "quality-range",
// "speed-negative", "speed-range", "command-code", "image-ref", "ground-truth-quality".
ValidationResult validate_plan(const WaypointPlan& plan, const ValidationContext& ctx);
ValidationResult validate_sample(const LabeledSample& s, const ValidationContext& ctx);
ValidationResult validate_sample(const PseudoLabeledSample& s, const ValidationContext& ctx);

}  // namespace selfd::core
