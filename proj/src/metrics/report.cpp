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

#include "selfd/metrics/report.hpp"

#include <cstdio>
#include <sstream>

namespace selfd::metrics {

ClosedLoopSummary summarize(const ClosedLoopReport& report) {
  return {report.success_rate,          report.route_completion, report.collisions_per_10km,
          static_cast<int>(report.routes.size()), report.meters, report.collisions};
}

void to_json(nlohmann::json& j, const ClosedLoopSummary& s) {
  j = nlohmann::json{{"success_rate", s.success_rate},
                     {"route_completion", s.route_completion},
                     {"collisions_per_10km", s.collisions_per_10km},
                     {"routes", s.routes},
                     {"meters", s.meters},
                     {"collisions", s.collisions}};
}

void from_json(const nlohmann::json& j, ClosedLoopSummary& s) {
  s.success_rate = j.at("success_rate").get<double>();
  s.route_completion = j.at("route_completion").get<double>();
  s.collisions_per_10km = j.at("collisions_per_10km").get<double>();
  s.routes = j.value("routes", 0);
  s.meters = j.value("meters", 0.0);
  s.collisions = j.value("collisions", 0);
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"split", r.split}, {"count", r.count}, {"ade", r.ade}, {"fde", r.fde}};
  j["collision_rate"] = r.collision_rate ? nlohmann::json(*r.collision_rate) : nlohmann::json(nullptr);
  if (r.closed_loop) j["closed_loop"] = *r.closed_loop;
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  r.split = j.value("split", std::string());
  r.count = j.value("count", std::size_t{0});
  r.ade = j.value("ade", 0.0);
  r.fde = j.value("fde", 0.0);
  r.collision_rate.reset();
  if (j.contains("collision_rate") && !j.at("collision_rate").is_null()) r.collision_rate = j.at("collision_rate").get<double>();
  r.closed_loop.reset();
  if (j.contains("closed_loop")) r.closed_loop = j.at("closed_loop").get<ClosedLoopSummary>();
}

namespace {

std::string fmt(double v, const char* spec = "%.3f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  bool closed = false;
  for (const auto& [_, r] : rows) closed = closed || r.closed_loop.has_value();
  std::ostringstream out;
  out << "| model | split | n | ADE (m) | FDE (m) | Coll. rate |";
  if (closed) out << " SR | RC | Coll./10km |";
  out << "\n|---|---|---|---|---|---|";
  if (closed) out << "---|---|---|";
  out << "\n";
  for (const auto& [name, r] : rows) {
    out << "| " << name << " | " << r.split << " | " << r.count << " | " << fmt(r.ade) << " | " << fmt(r.fde) << " | "
        << (r.collision_rate ? fmt(*r.collision_rate) : "n/a") << " |";
    if (closed) {
      if (r.closed_loop) {
        out << " " << fmt(r.closed_loop->success_rate, "%.2f") << " | " << fmt(r.closed_loop->route_completion, "%.2f")
            << " | " << fmt(r.closed_loop->collisions_per_10km, "%.1f") << " |";
      } else {
        out << " n/a | n/a | n/a |";
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace selfd::metrics
