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

#include "selfd/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include "selfd/sim/longitudinal.hpp"

namespace selfd::sim {

using core::Vec2;

void WorldConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid world config: ") + what);
  };
  require(grid_lines >= 3, "grid_lines must be at least 3");
  require(block_min_m > 0.0 && block_max_m >= block_min_m, "block lengths");
  require(road_half_width_m > 0.0, "road width must be positive (zero lanes)");
  require(lane_offset_m > 0.0 && lane_offset_m < road_half_width_m, "lane offset must lie inside the road");
  require(turn_radius_right_m > 0.0 && turn_radius_left_m > 0.0, "turn radii");
  require(turn_radius_right_m + road_half_width_m + 6.0 < block_min_m, "blocks too short for the turn geometry");
  require(route_length_m > 0.0 && route_extension_m >= 0.0, "route length");
  require(turn_probability >= 0.0 && turn_probability <= 1.0, "turn probability");
  require(lead_probability >= 0.0 && lead_probability <= 1.0, "lead probability");
  require(lead_gap_min_m > agent_length_m && lead_gap_max_m >= lead_gap_min_m, "lead gap");
  require(lead_speed_min > 0.0 && lead_speed_max >= lead_speed_min, "lead speed");
  require(oncoming_per_segment >= 0, "oncoming count");
  require(oncoming_speed_min > 0.0 && oncoming_speed_max >= oncoming_speed_min, "oncoming speed");
  require(cruise_speed_min > 0.0 && cruise_speed_max >= cruise_speed_min, "cruise speed");
  require(lateral_accel > 0.0 && comfort_decel > 0.0, "longitudinal limits");
}

void to_json(nlohmann::json& j, const WorldConfig& c) {
  j = nlohmann::json{{"grid_lines", c.grid_lines},
                     {"block_min_m", c.block_min_m},
                     {"block_max_m", c.block_max_m},
                     {"road_half_width_m", c.road_half_width_m},
                     {"lane_offset_m", c.lane_offset_m},
                     {"turn_radius_right_m", c.turn_radius_right_m},
                     {"turn_radius_left_m", c.turn_radius_left_m},
                     {"route_length_m", c.route_length_m},
                     {"route_extension_m", c.route_extension_m},
                     {"start_offset_m", c.start_offset_m},
                     {"turn_probability", c.turn_probability},
                     {"lead_probability", c.lead_probability},
                     {"lead_gap_min_m", c.lead_gap_min_m},
                     {"lead_gap_max_m", c.lead_gap_max_m},
                     {"lead_speed_min", c.lead_speed_min},
                     {"lead_speed_max", c.lead_speed_max},
                     {"oncoming_per_segment", c.oncoming_per_segment},
                     {"oncoming_speed_min", c.oncoming_speed_min},
                     {"oncoming_speed_max", c.oncoming_speed_max},
                     {"agent_length_m", c.agent_length_m},
                     {"agent_width_m", c.agent_width_m},
                     {"cruise_speed_min", c.cruise_speed_min},
                     {"cruise_speed_max", c.cruise_speed_max},
                     {"lateral_accel", c.lateral_accel},
                     {"comfort_decel", c.comfort_decel}};
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
  c.grid_lines = j.value("grid_lines", c.grid_lines);
  c.block_min_m = j.value("block_min_m", c.block_min_m);
  c.block_max_m = j.value("block_max_m", c.block_max_m);
  c.road_half_width_m = j.value("road_half_width_m", c.road_half_width_m);
  c.lane_offset_m = j.value("lane_offset_m", c.lane_offset_m);
  c.turn_radius_right_m = j.value("turn_radius_right_m", c.turn_radius_right_m);
  c.turn_radius_left_m = j.value("turn_radius_left_m", c.turn_radius_left_m);
  c.route_length_m = j.value("route_length_m", c.route_length_m);
  c.route_extension_m = j.value("route_extension_m", c.route_extension_m);
  c.start_offset_m = j.value("start_offset_m", c.start_offset_m);
  c.turn_probability = j.value("turn_probability", c.turn_probability);
  c.lead_probability = j.value("lead_probability", c.lead_probability);
  c.lead_gap_min_m = j.value("lead_gap_min_m", c.lead_gap_min_m);
  c.lead_gap_max_m = j.value("lead_gap_max_m", c.lead_gap_max_m);
  c.lead_speed_min = j.value("lead_speed_min", c.lead_speed_min);
  c.lead_speed_max = j.value("lead_speed_max", c.lead_speed_max);
  c.oncoming_per_segment = j.value("oncoming_per_segment", c.oncoming_per_segment);
  c.oncoming_speed_min = j.value("oncoming_speed_min", c.oncoming_speed_min);
  c.oncoming_speed_max = j.value("oncoming_speed_max", c.oncoming_speed_max);
  c.agent_length_m = j.value("agent_length_m", c.agent_length_m);
  c.agent_width_m = j.value("agent_width_m", c.agent_width_m);
  c.cruise_speed_min = j.value("cruise_speed_min", c.cruise_speed_min);
  c.cruise_speed_max = j.value("cruise_speed_max", c.cruise_speed_max);
  c.lateral_accel = j.value("lateral_accel", c.lateral_accel);
  c.comfort_decel = j.value("comfort_decel", c.comfort_decel);
}

// ---------------------------------------------------------------------------------------------
// Road grid

namespace {

double rect_distance(double x, double y, double x0, double x1, double y0, double y1) {
  const double dx = std::max({x0 - x, 0.0, x - x1});
  const double dy = std::max({y0 - y, 0.0, y - y1});
  return std::hypot(dx, dy);
}

}  // namespace

double RoadGrid::offroad_distance(Vec2 p) const {
  const double h = half_width;
  double best = std::numeric_limits<double>::infinity();
  for (double x : xs) best = std::min(best, rect_distance(p.x, p.y, x - h, x + h, ys.front() - h, ys.back() + h));
  for (double y : ys) best = std::min(best, rect_distance(p.x, p.y, xs.front() - h, xs.back() + h, y - h, y + h));
  return best;
}

bool RoadGrid::in_intersection(Vec2 p) const {
  bool near_x = false, near_y = false;
  for (double x : xs) near_x = near_x || std::abs(p.x - x) <= half_width;
  for (double y : ys) near_y = near_y || std::abs(p.y - y) <= half_width;
  return near_x && near_y;
}

std::optional<RoadGrid::MarkingCoords> RoadGrid::marking_coords(Vec2 p) const {
  const double h = half_width;
  std::optional<MarkingCoords> out;
  int hits = 0;
  if (p.y >= ys.front() - h && p.y <= ys.back() + h) {
    for (double x : xs) {
      if (std::abs(p.x - x) < h) {
        out = MarkingCoords{p.x - x, p.y};
        ++hits;
      }
    }
  }
  if (p.x >= xs.front() - h && p.x <= xs.back() + h) {
    for (double y : ys) {
      if (std::abs(p.y - y) < h) {
        out = MarkingCoords{p.y - y, p.x};
        ++hits;
      }
    }
  }
  if (hits != 1) return std::nullopt;
  return out;
}

// ---------------------------------------------------------------------------------------------
// Route

Route::Route(std::vector<Sample> samples, std::vector<GridNode> nodes, double goal_s, double start_s)
    : samples_(std::move(samples)), nodes_(std::move(nodes)), goal_s_(goal_s), start_s_(start_s) {
  if (samples_.size() < 2) throw std::invalid_argument("route needs at least two samples");
}

std::size_t Route::index_at(double s) const {
  // Last sample with samples_[i].s <= s, limited to size-2.
  auto it = std::upper_bound(samples_.begin(), samples_.end(), s,
                             [](double v, const Sample& smp) { return v < smp.s; });
  std::size_t i = it == samples_.begin() ? 0 : static_cast<std::size_t>(it - samples_.begin() - 1);
  return std::min(i, samples_.size() - 2);
}

core::Pose2 Route::pose_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const std::size_t i = index_at(s);
  const Sample& a = samples_[i];
  const Sample& b = samples_[i + 1];
  const double span = b.s - a.s;
  const double t = span > 0.0 ? (s - a.s) / span : 0.0;
  const Vec2 p = a.p + t * (b.p - a.p);
  const double yaw = core::wrap_angle(a.heading + t * core::wrap_angle(b.heading - a.heading));
  return {p.x, p.y, yaw};
}

double Route::curvature_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const std::size_t i = index_at(s);
  return (s - samples_[i].s) < (samples_[i + 1].s - s) ? samples_[i].curvature : samples_[i + 1].curvature;
}

double Route::speed_limit_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const std::size_t i = index_at(s);
  const Sample& a = samples_[i];
  const Sample& b = samples_[i + 1];
  const double t = (s - a.s) / std::max(b.s - a.s, 1e-12);
  return a.speed_limit + t * (b.speed_limit - a.speed_limit);
}

void Route::set_speed_limits(double lateral_accel, double comfort_decel) {
  constexpr double kFree = 1e3;
  for (auto& smp : samples_) {
    smp.speed_limit = std::abs(smp.curvature) > 1e-9 ? std::sqrt(lateral_accel / std::abs(smp.curvature)) : kFree;
  }
  for (std::size_t i = samples_.size() - 1; i-- > 0;) {
    const double ds = samples_[i + 1].s - samples_[i].s;
    const double reach = std::sqrt(samples_[i + 1].speed_limit * samples_[i + 1].speed_limit + 2.0 * comfort_decel * ds);
    samples_[i].speed_limit = std::min(samples_[i].speed_limit, reach);
  }
}

double Route::project(Vec2 p, double s_lo, double s_hi) const {
  s_lo = std::clamp(s_lo, 0.0, length());
  s_hi = std::clamp(s_hi, s_lo, length());
  const std::size_t i0 = index_at(s_lo), i1 = index_at(s_hi);
  double best_d = std::numeric_limits<double>::infinity(), best_s = s_lo;
  for (std::size_t i = i0; i <= i1; ++i) {
    const Vec2 a = samples_[i].p, b = samples_[i + 1].p;
    const Vec2 ab = b - a;
    const double len2 = core::dot(ab, ab);
    const double t = len2 > 0.0 ? std::clamp(core::dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    const double d = (a + t * ab - p).norm();
    if (d < best_d) {
      best_d = d;
      best_s = samples_[i].s + t * (samples_[i + 1].s - samples_[i].s);
    }
  }
  return std::clamp(best_s, s_lo, s_hi);
}

double Route::distance_to(Vec2 p) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < samples_.size(); ++i) {
    best = std::min(best, core::point_segment_distance(p, samples_[i].p, samples_[i + 1].p));
  }
  return best;
}

// ---------------------------------------------------------------------------------------------
// Agents

double AlongTrack::s_at(double t) const {
  if (s.empty()) return 0.0;
  const double k = t / dt;
  if (k <= 0.0) return s.front();
  const std::size_t i = static_cast<std::size_t>(k);
  if (i + 1 >= s.size()) return s.back() + v.back() * (t - dt * static_cast<double>(s.size() - 1));
  const double f = k - static_cast<double>(i);
  return s[i] + f * (s[i + 1] - s[i]);
}

double AlongTrack::v_at(double t) const {
  if (v.empty()) return 0.0;
  const std::size_t i = static_cast<std::size_t>(std::max(0.0, t / dt));
  return v[std::min(i, v.size() - 1)];
}

core::Pose2 OncomingAgent::pose_at(double t) const {
  const Vec2 d = to - from;
  const double len = d.norm();
  double p = std::fmod(phase_m + speed * t, len);
  if (p < 0.0) p += len;
  const Vec2 u = (1.0 / len) * d;
  const Vec2 c = from + p * u;
  return {c.x, c.y, std::atan2(u.y, u.x)};
}

std::vector<AgentBox> World::agents_at(double t) const {
  std::vector<AgentBox> out;
  if (lead) {
    const double s = lead->track.s_at(t);
    if (s < route.length()) out.push_back({{route.pose_at(s), 0.5 * lead->length, 0.5 * lead->width}, 0});
  }
  for (std::size_t i = 0; i < oncoming.size(); ++i) {
    const auto& a = oncoming[i];
    out.push_back({{a.pose_at(t), 0.5 * a.length, 0.5 * a.width}, static_cast<int>(i) + 1});
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// World construction

namespace {

constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

Vec2 right_of(Vec2 d) { return {d.y, -d.x}; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

struct Segment {
  GridNode a, b;
  bool operator<(const Segment& o) const {
    auto key = [](const Segment& s) {
      // Undirected key.
      const int a = s.a.i * 1000 + s.a.j, b = s.b.i * 1000 + s.b.j;
      return std::pair(std::min(a, b), std::max(a, b));
    };
    return key(*this) < key(o);
  }
};

double segment_length(const RoadGrid& g, GridNode a, GridNode b) { return (g.node(b.i, b.j) - g.node(a.i, a.j)).norm(); }

// Random walk over the grid without reusing any road section and without U-turns.
std::vector<GridNode> random_walk(const RoadGrid& grid, const WorldConfig& c, std::mt19937_64& rng) {
  const int n = c.grid_lines;
  const double needed = c.start_offset_m + c.route_length_m + c.route_extension_m + 2.0 * c.block_max_m;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    GridNode cur{uniform_int(rng, 0, n - 1), uniform_int(rng, 0, n - 1)};
    int dir = uniform_int(rng, 0, 3);
    std::vector<GridNode> nodes{cur};
    std::set<Segment> used;
    double total = 0.0;
    bool turned = false;
    bool stuck = false;
    while (total < needed) {
      // Candidate directions in preference order.
      std::vector<int> options;
      const bool want_turn = nodes.size() > 1 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < c.turn_probability;
      const int left = (dir + 1) % 4, right = (dir + 3) % 4;
      const bool left_first = std::uniform_int_distribution<int>(0, 1)(rng) == 0;
      const int t1 = left_first ? left : right, t2 = left_first ? right : left;
      if (nodes.size() == 1) options = {dir};
      else if (want_turn) options = {t1, t2, dir};
      else options = {dir, t1, t2};
      bool moved = false;
      for (int d : options) {
        const GridNode nxt{cur.i + kDx[d], cur.j + kDy[d]};
        if (nxt.i < 0 || nxt.j < 0 || nxt.i >= n || nxt.j >= n) continue;
        if (used.count({cur, nxt})) continue;
        used.insert({cur, nxt});
        total += segment_length(grid, cur, nxt);
        turned = turned || (nodes.size() > 1 && d != dir);
        dir = d;
        cur = nxt;
        nodes.push_back(cur);
        moved = true;
        break;
      }
      if (!moved) {
        stuck = true;
        break;
      }
    }
    if (!stuck && (turned || c.turn_probability == 0.0)) return nodes;
  }
  throw std::invalid_argument("could not build a route in the configured grid");
}

struct Primitive {
  bool arc = false;
  Vec2 a, b;             // line endpoints
  Vec2 center;           // arc
  double radius = 0.0;
  double start_angle = 0.0;  // angle of (start - center)
  double sweep = 0.0;        // signed, left turns positive
  double heading0 = 0.0;

  double length() const { return arc ? radius * std::abs(sweep) : (b - a).norm(); }
};

std::vector<Route::Sample> densify(const std::vector<Primitive>& prims, double step) {
  std::vector<Route::Sample> out;
  double s0 = 0.0;
  for (const auto& pr : prims) {
    const double len = pr.length();
    if (len <= 1e-9) continue;
    const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
    for (int k = out.empty() ? 0 : 1; k <= n; ++k) {
      const double t = static_cast<double>(k) / n;
      Route::Sample smp{};
      smp.s = s0 + t * len;
      if (pr.arc) {
        const double ang = pr.start_angle + t * pr.sweep;
        smp.p = pr.center + pr.radius * Vec2{std::cos(ang), std::sin(ang)};
        smp.heading = core::wrap_angle(pr.heading0 + t * pr.sweep);
        smp.curvature = (pr.sweep > 0 ? 1.0 : -1.0) / pr.radius;
      } else {
        smp.p = pr.a + t * (pr.b - pr.a);
        const Vec2 d = pr.b - pr.a;
        smp.heading = std::atan2(d.y, d.x);
        smp.curvature = 0.0;
      }
      out.push_back(smp);
    }
    s0 += len;
  }
  return out;
}

}  // namespace

World build_world(std::uint64_t seed, const WorldConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  World w;
  w.seed = seed;
  w.config = config;
  w.grid.half_width = config.road_half_width_m;
  double x = 0.0, y = 0.0;
  for (int i = 0; i < config.grid_lines; ++i) {
    w.grid.xs.push_back(x);
    x += uniform(rng, config.block_min_m, config.block_max_m);
  }
  for (int j = 0; j < config.grid_lines; ++j) {
    w.grid.ys.push_back(y);
    y += uniform(rng, config.block_min_m, config.block_max_m);
  }

  const auto nodes = random_walk(w.grid, config, rng);
  const double lo = config.lane_offset_m;
  std::vector<Vec2> dirs;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const Vec2 d = w.grid.node(nodes[k + 1].i, nodes[k + 1].j) - w.grid.node(nodes[k].i, nodes[k].j);
    dirs.push_back((1.0 / d.norm()) * d);
  }

  std::vector<Primitive> prims;
  Vec2 cursor = w.grid.node(nodes[0].i, nodes[0].j) + lo * right_of(dirs[0]);
  for (std::size_t k = 1; k + 1 < nodes.size(); ++k) {
    const Vec2 din = dirs[k - 1], dout = dirs[k];
    const double turn = core::cross(din, dout);
    if (std::abs(turn) < 0.5) continue;  // straight through
    const Vec2 node = w.grid.node(nodes[k].i, nodes[k].j);
    const Vec2 corner = node + lo * right_of(din) + lo * right_of(dout);
    const double r = turn > 0 ? config.turn_radius_left_m : config.turn_radius_right_m;
    const Vec2 start = corner - r * din;
    const Vec2 end = corner + r * dout;
    const Vec2 center = start + r * dout;
    Primitive line;
    line.a = cursor;
    line.b = start;
    prims.push_back(line);
    Primitive arc;
    arc.arc = true;
    arc.center = center;
    arc.radius = r;
    const Vec2 rel = start - center;
    arc.start_angle = std::atan2(rel.y, rel.x);
    arc.sweep = turn > 0 ? std::numbers::pi / 2 : -std::numbers::pi / 2;
    arc.heading0 = std::atan2(din.y, din.x);
    prims.push_back(arc);
    cursor = end;
  }
  Primitive last;
  last.a = cursor;
  last.b = w.grid.node(nodes.back().i, nodes.back().j) + lo * right_of(dirs.back());
  prims.push_back(last);

  auto samples = densify(prims, 0.5);
  const double start_s = config.start_offset_m;
  const double goal_s = std::min(start_s + config.route_length_m, samples.back().s - config.route_extension_m);
  w.route = Route(std::move(samples), nodes, goal_s, start_s);
  w.route.set_speed_limits(config.lateral_accel, config.comfort_decel);
  w.cruise_speed = uniform(rng, config.cruise_speed_min, config.cruise_speed_max);

  // Lead vehicle on the ego lane.
  const double lead_draw = uniform(rng, 0.0, 1.0);
  const double lead_gap = uniform(rng, config.lead_gap_min_m, config.lead_gap_max_m);
  const double lead_cruise = uniform(rng, config.lead_speed_min, config.lead_speed_max);
  if (lead_draw < config.lead_probability) {
    LeadAgent lead;
    lead.length = config.agent_length_m;
    lead.width = config.agent_width_m;
    const IdmParams idm;
    double s = start_s + lead_gap;
    double v = std::min(lead_cruise, w.route.speed_limit_at(s));
    const double dt = lead.track.dt;
    const double t_max = 600.0;
    for (double t = 0.0; t <= t_max && s < w.route.length(); t += dt) {
      lead.track.s.push_back(s);
      lead.track.v.push_back(v);
      const double a = idm_accel(v, std::min(lead_cruise, w.route.speed_limit_at(s)), std::nullopt, idm);
      const double v_next = std::max(0.0, v + a * dt);
      s += 0.5 * (v + v_next) * dt;
      v = v_next;
    }
    lead.track.s.push_back(s);
    lead.track.v.push_back(v);
    w.lead = std::move(lead);
  }

  // Oncoming traffic on the opposite lane of each traversed road section, kept out of crossings.
  const double zone = config.road_half_width_m + 6.0;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const int count = uniform_int(rng, 0, config.oncoming_per_segment);
    const double speed = uniform(rng, config.oncoming_speed_min, config.oncoming_speed_max);
    const double base = uniform(rng, 0.0, 1.0);
    if (count == 0) continue;
    const Vec2 a = w.grid.node(nodes[k].i, nodes[k].j), b = w.grid.node(nodes[k + 1].i, nodes[k + 1].j);
    const Vec2 d = dirs[k];
    const Vec2 opp_lane = -lo * right_of(d);
    const Vec2 from = b - zone * d + opp_lane;
    const Vec2 to = a + zone * d + opp_lane;
    const double len = (to - from).norm();
    for (int m = 0; m < count; ++m) {
      OncomingAgent ag;
      ag.from = from;
      ag.to = to;
      ag.speed = speed;
      ag.phase_m = std::fmod((base + static_cast<double>(m) / count) * len, len);
      ag.length = config.agent_length_m;
      ag.width = config.agent_width_m;
      w.oncoming.push_back(ag);
    }
  }
  return w;
}

}  // namespace selfd::sim
