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

#include "selfd/planner/config.hpp"

#include <stdexcept>

#include "selfd/core/types.hpp"

namespace selfd::planner {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kImagePlaneHomography:
      return "image_plane_homography";
    case Variant::kSingleBranchBev:
      return "single_branch_bev";
    case Variant::kMultiBranchBev:
      return "multi_branch_bev";
  }
  return "unknown";
}

Variant variant_from_name(std::string_view name) {
  if (name == "image_plane_homography" || name == "a") return Variant::kImagePlaneHomography;
  if (name == "single_branch_bev" || name == "b") return Variant::kSingleBranchBev;
  if (name == "multi_branch_bev" || name == "c") return Variant::kMultiBranchBev;
  throw std::invalid_argument("unknown planner variant '" + std::string(name) + "'");
}

namespace {
int conv_out(int n, int stride) { return (n - 1) / stride + 1; }
}  // namespace

int PlannerConfig::feature_width() const {
  int w = input_width;
  for (const auto& b : encoder) w = conv_out(w, b.stride);
  return w;
}

int PlannerConfig::feature_height() const {
  int h = input_height;
  for (const auto& b : encoder) h = conv_out(h, b.stride);
  return h;
}

void PlannerConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid planner config: ") + what);
  };
  require(input_width > 0 && input_height > 0, "input resolution must be positive");
  require(num_waypoints > 0, "num_waypoints must be positive");
  require(!encoder.empty(), "encoder needs at least one block");
  for (const auto& b : encoder) require(b.channels > 0 && (b.stride == 1 || b.stride == 2), "encoder block");
  require(latent_dim > 0 && global_channels > 0 && decoder_channels > 0, "layer widths must be positive");
  require(decoder_upsample == 1 || decoder_upsample == 2, "decoder_upsample must be 1 or 2");
  require(num_branches == core::kNumCommands, "branch count must equal the number of commands");
  require(projection_hidden > 0, "projection_hidden must be positive");
  require(softmax_temperature > 0.0, "softmax temperature must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  require(speed_max > 0.0 && bev_output_scale > 0.0, "scales must be positive");
  if (variant == Variant::kImagePlaneHomography) {
    require(homography_camera.valid(), "homography camera");
  }
}

void to_json(nlohmann::json& j, const PlannerConfig& c) {
  nlohmann::json enc = nlohmann::json::array();
  for (const auto& b : c.encoder) enc.push_back({{"channels", b.channels}, {"stride", b.stride}});
  j = nlohmann::json{{"input_width", c.input_width},
                     {"input_height", c.input_height},
                     {"num_waypoints", c.num_waypoints},
                     {"encoder", enc},
                     {"latent_dim", c.latent_dim},
                     {"global_channels", c.global_channels},
                     {"decoder_channels", c.decoder_channels},
                     {"decoder_upsample", c.decoder_upsample},
                     {"num_branches", c.num_branches},
                     {"projection_hidden", c.projection_hidden},
                     {"softmax_temperature", c.softmax_temperature},
                     {"dropout", c.dropout},
                     {"speed_max", c.speed_max},
                     {"bev_output_scale", c.bev_output_scale},
                     {"variant", std::string(variant_name(c.variant))},
                     {"homography_camera", c.homography_camera}};
}

void from_json(const nlohmann::json& j, PlannerConfig& c) {
  c.input_width = j.value("input_width", c.input_width);
  c.input_height = j.value("input_height", c.input_height);
  c.num_waypoints = j.value("num_waypoints", c.num_waypoints);
  if (j.contains("encoder")) {
    c.encoder.clear();
    for (const auto& b : j.at("encoder")) c.encoder.push_back({b.at("channels").get<int>(), b.at("stride").get<int>()});
  }
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.global_channels = j.value("global_channels", c.global_channels);
  c.decoder_channels = j.value("decoder_channels", c.decoder_channels);
  c.decoder_upsample = j.value("decoder_upsample", c.decoder_upsample);
  c.num_branches = j.value("num_branches", c.num_branches);
  c.projection_hidden = j.value("projection_hidden", c.projection_hidden);
  c.softmax_temperature = j.value("softmax_temperature", c.softmax_temperature);
  c.dropout = j.value("dropout", c.dropout);
  c.speed_max = j.value("speed_max", c.speed_max);
  c.bev_output_scale = j.value("bev_output_scale", c.bev_output_scale);
  if (j.contains("variant")) c.variant = variant_from_name(j.at("variant").get<std::string>());
  if (j.contains("homography_camera")) c.homography_camera = j.at("homography_camera").get<core::CameraSpec>();
}

}  // namespace selfd::planner
