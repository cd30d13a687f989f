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
#include <optional>
#include <string>
#include <vector>

#include "selfd/core/types.hpp"

namespace selfd::train {

enum class DatasetKind { kLabeled, kPseudo };

/// A manifest loaded into memory. Images are kept as 8-bit pixels, shared between records that
/// reference the same file.
struct TrainingSet {
  DatasetKind kind = DatasetKind::kLabeled;
  std::string fingerprint;  // manifest fingerprint
  std::string source;       // manifest path
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // unique images, interleaved RGB
  std::vector<std::uint32_t> image_index;
  std::vector<double> speeds;
  std::vector<core::Command> commands;
  std::vector<core::WaypointPlan> targets;
  std::vector<std::optional<std::vector<core::AgentTrack>>> agents;  // labeled sets only

  std::size_t size() const { return speeds.size(); }
  std::size_t image_count() const;
  core::Image image(std::size_t record) const;
  /// Writes the record image as planner input (value - 0.5, channel-planar) into batch slot `slot`.
  void pack(std::size_t record, int slot, float* planar, std::size_t stride) const;
};

TrainingSet load_labeled_set(const std::filesystem::path& manifest, int threads = 1);
TrainingSet load_pseudo_set(const std::filesystem::path& manifest, int threads = 1);

}  // namespace selfd::train
