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

#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "selfd/core/camera.hpp"

namespace selfd::planner {

/// Where BEV waypoints come from.
///  - kImagePlaneHomography: command-selected image-plane waypoints mapped through a fixed,
///    calibrated ground homography (ablation baseline).
///  - kSingleBranchBev: one learned projection stack shared by all commands.
///  - kMultiBranchBev: one learned projection stack per command.
enum class Variant { kImagePlaneHomography, kSingleBranchBev, kMultiBranchBev };

std::string_view variant_name(Variant v);
Variant variant_from_name(std::string_view name);

struct EncoderBlock {
  int channels = 8;
  int stride = 2;
  friend bool operator==(const EncoderBlock&, const EncoderBlock&) = default;
};

struct PlannerConfig {
  int input_width = 128;
  int input_height = 72;
  int num_waypoints = 5;
  std::vector<EncoderBlock> encoder = {{8, 2}, {16, 2}, {24, 2}, {32, 2}};
  int latent_dim = 64;
  int global_channels = 8;
  int decoder_channels = 16;
  int decoder_upsample = 1;  // heatmap geometry = encoder geometry * upsample (1 or 2)
  int num_branches = 3;
  int projection_hidden = 64;
  double softmax_temperature = 1.0;
  double dropout = 0.1;
  double speed_max = 12.0;        // speed normalisation, m/s
  double bev_output_scale = 10.0;  // meters per unit of the projection output
  Variant variant = Variant::kMultiBranchBev;
  core::CameraSpec homography_camera;  // used by kImagePlaneHomography only

  int feature_width() const;
  int feature_height() const;
  int feature_channels() const { return encoder.back().channels; }
  int heatmap_width() const { return feature_width() * decoder_upsample; }
  int heatmap_height() const { return feature_height() * decoder_upsample; }

  /// Throws std::invalid_argument on the first violated constraint.
  void validate() const;

  friend bool operator==(const PlannerConfig&, const PlannerConfig&) = default;
};

void to_json(nlohmann::json& j, const PlannerConfig& c);
void from_json(const nlohmann::json& j, PlannerConfig& c);

}  // namespace selfd::planner

