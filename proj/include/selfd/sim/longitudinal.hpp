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

#include <algorithm>
#include <cmath>
#include <optional>

namespace selfd::sim {

/// Intelligent-driver-model car following.
struct IdmParams {
  double max_accel = 1.5;
  double comfort_decel = 2.0;
  double min_gap_m = 4.0;
  double time_headway_s = 1.2;
  double hard_decel = 6.0;

  friend bool operator==(const IdmParams&, const IdmParams&) = default;
};

struct LeadGap {
  double gap_m;  // bumper to bumper
  double lead_speed;
};

inline double idm_accel(double v, double v_desired, const std::optional<LeadGap>& lead, const IdmParams& p) {
  const double v0 = std::max(v_desired, 0.1);
  double a = p.max_accel * (1.0 - std::pow(v / v0, 4));
  if (lead) {
    const double dv = v - lead->lead_speed;
    const double s_star =
        p.min_gap_m + std::max(0.0, v * p.time_headway_s + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    const double gap = std::max(lead->gap_m, 0.1);
    a -= p.max_accel * (s_star / gap) * (s_star / gap);
  }
  return std::clamp(a, -p.hard_decel, p.max_accel);
}

}  // namespace selfd::sim
