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

#include <cstddef>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "selfd/metrics/closed_loop.hpp"

namespace selfd::metrics {

struct ClosedLoopSummary {
  double success_rate = 0.0;
  double route_completion = 0.0;
  double collisions_per_10km = 0.0;
  int routes = 0;
  double meters = 0.0;
  int collisions = 0;
};

ClosedLoopSummary summarize(const ClosedLoopReport& report);

struct MetricsReport {
  std::string split;
  std::size_t count = 0;
  double ade = 0.0;
  double fde = 0.0;
  std::optional<double> collision_rate;  // nullopt when agent annotations are missing
  std::optional<ClosedLoopSummary> closed_loop;
};

void to_json(nlohmann::json& j, const ClosedLoopSummary& s);
void from_json(const nlohmann::json& j, ClosedLoopSummary& s);
void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

/// Markdown table with one row per named report. Missing values print as "n/a".
std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace selfd::metrics
