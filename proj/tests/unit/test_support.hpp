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

#include <filesystem>
#include <random>
#include <string>

#include "selfd/core/types.hpp"
#include "selfd/planner/config.hpp"

namespace selfd::testing {

inline core::Image random_image(int w, int h, std::mt19937_64& rng) {
  core::Image img(w, h);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& v : img.data) v = static_cast<float>(uni(rng));
  core::quantize(img);
  return img;
}

inline core::WaypointPlan random_plan(int k, std::mt19937_64& rng, double scale = 10.0) {
  core::WaypointPlan p;
  std::uniform_real_distribution<double> uni(-scale, scale);
  for (int i = 0; i < k; ++i) p.waypoints.push_back({uni(rng), uni(rng)});
  p.quality = 1.0;
  return p;
}

/// Small planner that runs in milliseconds.
inline planner::PlannerConfig tiny_config(planner::Variant variant = planner::Variant::kMultiBranchBev) {
  planner::PlannerConfig c;
  c.input_width = 16;
  c.input_height = 8;
  c.num_waypoints = 3;
  c.encoder = {{3, 2}, {4, 2}};
  c.latent_dim = 6;
  c.global_channels = 2;
  c.decoder_channels = 3;
  c.decoder_upsample = 2;
  c.projection_hidden = 5;
  c.dropout = 0.0;
  c.variant = variant;
  c.homography_camera = {1.7, 0.0, 70.0, 16, 8};
  return c;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("selfd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace selfd::testing
