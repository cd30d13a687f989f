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
#include <string_view>

#include "selfd/core/camera.hpp"
#include "selfd/core/types.hpp"
#include "selfd/sim/world.hpp"

namespace selfd::sim {

enum class Appearance { kDay, kDusk, kNight, kRain };

inline constexpr Appearance kAllAppearances[] = {Appearance::kDay, Appearance::kDusk, Appearance::kNight,
                                                 Appearance::kRain};

std::string_view appearance_name(Appearance a);
Appearance appearance_from_name(std::string_view name);

struct RenderOptions {
  int supersample = 2;  // per axis
  bool haze = true;
  double haze_distance_m = 90.0;
  double agent_height_m = 1.5;
};

/// Forward camera view from the ego pose at time t. Sky, road surface with lane markings, grass
/// blocks and agents as boxes are ray cast per subsample; the appearance preset then adjusts
/// brightness, tint, contrast and adds seeded pixel noise. The result is on the 8-bit grid.
core::Image render(const World& world, const core::Pose2& ego, double t, const core::CameraSpec& camera,
                   Appearance appearance, std::uint64_t noise_seed, const RenderOptions& options = {});

}  // namespace selfd::sim
