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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "selfd/core/geometry.hpp"

namespace selfd::core {

/// Conditional navigation command. Integer codes are part of the on-disk format.
enum class Command : int { kLeft = 1, kForward = 2, kRight = 3 };

inline constexpr int kNumCommands = 3;
inline constexpr Command kAllCommands[kNumCommands] = {Command::kLeft, Command::kForward,
                                                       Command::kRight};

inline constexpr int command_code(Command c) { return static_cast<int>(c); }
inline constexpr int command_index(Command c) { return static_cast<int>(c) - 1; }
inline constexpr bool is_command_code(int code) { return code >= 1 && code <= 3; }

inline Command command_from_code(int code) {
  if (!is_command_code(code)) throw std::invalid_argument("invalid command code " + std::to_string(code));
  return static_cast<Command>(code);
}

std::string_view command_name(Command c);

/// RGB image, row-major, interleaved channels, intensities in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool empty() const { return data.empty(); }
  double mean() const;

  friend bool operator==(const Image&, const Image&) = default;
};

/// Rounds every intensity onto the 8-bit grid used by the on-disk format.
void quantize(Image& image);

struct Observation {
  Image image;
  double speed = 0.0;  // m/s
  Command command = Command::kForward;
};

/// K future ego positions in BEV meters (x forward, y left, ego at origin) plus a quality score.
struct WaypointPlan {
  std::vector<Vec2> waypoints;
  double quality = 1.0;

  std::size_t size() const { return waypoints.size(); }
  friend bool operator==(const WaypointPlan&, const WaypointPlan&) = default;
};

/// Another vehicle around the ego, with its footprint at each of the K future waypoint times
/// expressed in the ego BEV frame of the current frame.
struct AgentTrack {
  double length = 4.5;
  double width = 1.8;
  std::vector<Pose2> future;

  OrientedRect footprint(std::size_t k) const { return {future.at(k), 0.5 * length, 0.5 * width}; }
  friend bool operator==(const AgentTrack&, const AgentTrack&) = default;
};

struct LabeledSample {
  std::string image;  // relative to the manifest directory
  double speed = 0.0;
  Command command = Command::kForward;
  WaypointPlan target;  // quality fixed at 1
  std::string episode_id;
  int frame_index = 0;
  std::optional<std::vector<AgentTrack>> nearby_agents;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct UnlabeledFrame {
  std::string image;
  std::string episode_id;
  int frame_index = 0;

  friend bool operator==(const UnlabeledFrame&, const UnlabeledFrame&) = default;
};

enum class SamplingKind { kUniform, kPrior, kFixed };

std::string_view sampling_kind_name(SamplingKind k);
SamplingKind sampling_kind_from_name(std::string_view name);

struct PseudoLabeledSample {
  std::string image;
  double sampled_speed = 0.0;
  Command sampled_command = Command::kForward;
  WaypointPlan pseudo_plan;  // quality holds the teacher's estimate
  std::string teacher_id;
  SamplingKind sampling_strategy = SamplingKind::kUniform;
  std::string episode_id;
  int frame_index = 0;

  friend bool operator==(const PseudoLabeledSample&, const PseudoLabeledSample&) = default;
};

/// 64-bit FNV-1a, used for checksums and fingerprints.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Mixes two 64-bit values into a well-distributed seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace selfd::core
