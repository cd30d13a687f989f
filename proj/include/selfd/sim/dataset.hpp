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
#include <filesystem>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

#include "selfd/core/camera.hpp"
#include "selfd/sim/dynamics.hpp"
#include "selfd/sim/expert.hpp"
#include "selfd/sim/render.hpp"
#include "selfd/sim/world.hpp"

namespace selfd::sim {

/// World families. Each owns a disjoint block of world seeds.
enum class Family : std::uint64_t { kLabeled = 0xA, kUnlabeled = 0xB, kEval = 0xC, kClosedLoop = 0xD };

/// World seed for episode `index` of a family: the family tag occupies the top byte.
std::uint64_t family_seed(Family family, std::uint64_t master_seed, std::uint64_t index);

struct CameraRandomization {
  double height_min_m = 1.2;
  double height_max_m = 2.2;
  double pitch_min_deg = -8.0;
  double pitch_max_deg = 8.0;
  double fov_min_deg = 50.0;
  double fov_max_deg = 90.0;

  friend bool operator==(const CameraRandomization&, const CameraRandomization&) = default;
};

core::CameraSpec sample_camera(const core::CameraSpec& base, const CameraRandomization& r, std::mt19937_64& rng);

struct SplitSpec {
  int episodes = 0;
  bool randomize_camera = false;
  std::vector<Appearance> appearances{Appearance::kDay};

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct DatasetConfig {
  std::uint64_t seed = 1;
  WorldConfig world;
  EpisodeConfig episode;
  ExpertConfig expert;
  VehicleParams vehicle;
  RenderOptions render;
  core::CameraSpec camera;  // labeled camera; its resolution is used for every split
  CameraRandomization camera_randomization;
  SplitSpec labeled{50, false, {Appearance::kDay}};
  SplitSpec unlabeled{500, true, {Appearance::kDay, Appearance::kDusk, Appearance::kNight, Appearance::kRain}};
  SplitSpec eval{30, true, {Appearance::kDay, Appearance::kDusk, Appearance::kNight, Appearance::kRain}};
  int threads = 1;
};

void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

/// Per-episode rendering setup, drawn deterministically from the family seed.
struct EpisodeSetup {
  std::uint64_t world_seed = 0;
  core::CameraSpec camera;
  Appearance appearance = Appearance::kDay;
  std::uint64_t noise_seed = 0;
};

EpisodeSetup episode_setup(const DatasetConfig& c, Family family, const SplitSpec& split, int episode);

struct GeneratedDataset {
  std::filesystem::path labeled;
  std::filesystem::path unlabeled;
  std::filesystem::path eval;
  int expert_collisions = 0;
  std::size_t labeled_frames = 0;
  std::size_t unlabeled_frames = 0;
  std::size_t eval_frames = 0;
};

/// Generates the three splits under `out_dir`:
///   labeled/    world family A, fixed camera, expert waypoint targets
///   unlabeled/  world family B, randomized camera and appearance per episode, images only
///   eval/       world family C, randomized camera and appearance, targets plus agent futures
/// Each split holds manifest.jsonl, episodes.json and images/.
GeneratedDataset generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

}  // namespace selfd::sim
